// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Exit status is 0 unless --strict is given and a criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "crowdswap/coord.hpp"
#include "crowdswap/econ.hpp"
#include "crowdswap/learn.hpp"
#include "crowdswap/report.hpp"
#include "crowdswap/sim.hpp"

using namespace crowdswap;
using Clock = std::chrono::steady_clock;

namespace {

struct Job {
    sim::Scenario scenario;
    sim::RunResult result;
    std::string json;
    double seconds = 0.0;
};

void run_all(std::vector<Job>& jobs, int threads) {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
            const auto t0 = Clock::now();
            jobs[i].result = sim::run(jobs[i].scenario);
            jobs[i].seconds = std::chrono::duration<double>(Clock::now() - t0).count();
            jobs[i].json = report::to_json(jobs[i].result);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t)
        pool.emplace_back(work);
    work();
    for (auto& t : pool)
        t.join();
}

struct Verdict {
    int id;
    std::string title;
    bool pass = true;
    std::vector<std::string> details;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        details.push_back((ok ? "ok   " : "MISS ") + what);
    }
    void note(const std::string& what) { details.push_back("     " + what); }
};

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v)
        s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::optional<double> f1_at(const sim::RunResult& r, std::uint64_t n) {
    for (const auto& h : r.f1_history)
        if (h.n_seen == n)
            return h.f1;
    return std::nullopt;
}

const learn::ModelKind kLearners[] = {learn::ModelKind::HoeffdingTree, learn::ModelKind::WindowKnn,
                                      learn::ModelKind::OnlineForest};

sim::Scenario shipping(sim::StrategyKind strategy, learn::ModelKind model, std::uint64_t seed) {
    auto s = sim::default_crowdshipping();
    s.strategy.kind = strategy;
    s.predictor.model.kind = model;
    s.seed = seed;
    s.record_events = false;
    return s;
}

sim::Scenario sensing(int variant, sim::StrategyKind strategy, std::uint64_t seed) {
    auto s = sim::default_crowdsensing(variant);
    s.strategy.kind = strategy;
    s.seed = seed;
    s.record_events = false;
    return s;
}

// Index of runs by (scenario name, strategy, predictor).
using Key = std::tuple<std::string, std::string, std::string>;

std::map<Key, std::vector<const Job*>> group(const std::vector<Job>& jobs) {
    std::map<Key, std::vector<const Job*>> out;
    for (const auto& j : jobs)
        out[{j.result.scenario, j.result.strategy, j.result.predictor}].push_back(&j);
    return out;
}

std::vector<double> column(const std::vector<const Job*>& runs,
                           const std::function<double(const sim::RunResult&)>& get) {
    std::vector<double> v;
    for (const auto* j : runs)
        v.push_back(get(j->result));
    return v;
}

// ---------------------------------------------------------------------------

Verdict convergence(const std::map<Key, std::vector<const Job*>>& g, int seeds) {
    Verdict v{1, "prequential convergence"};
    std::map<learn::ModelKind, double> end_f1;
    double slowest = 0.0;
    for (auto m : kLearners) {
        const auto& runs = g.at({"crowdshipping", "not", std::string(learn::to_string(m))});
        std::vector<double> at2000;
        int missing = 0;
        for (const auto* j : runs) {
            slowest = std::max(slowest, j->seconds);
            if (auto f = f1_at(j->result, 2000))
                at2000.push_back(*f);
            else
                ++missing;
        }
        const double f = mean(at2000);
        v.check(missing == 0 && f >= 0.80,
                fmt::format("{} F1 after 2000 items {:.3f} (min {:.3f}, {} runs short of 2000)",
                            learn::to_string(m), f,
                            at2000.empty() ? 0.0 : *std::min_element(at2000.begin(), at2000.end()),
                            missing));
        end_f1[m] = mean(column(runs, [](const sim::RunResult& r) { return r.prediction.f1; }));
    }
    const auto& ht = g.at({"crowdshipping", "not", "hoeffding_tree"});
    const auto& forest = g.at({"crowdshipping", "not", "forest"});
    int wins = 0;
    for (std::size_t i = 0; i < ht.size(); ++i)
        wins += forest[i]->result.prediction.f1 >= ht[i]->result.prediction.f1;
    const int need = (2 * seeds + 2) / 3;
    v.check(wins >= need, fmt::format("forest >= tree at run end on {}/{} seeds (need {})", wins,
                                      seeds, need));
    const double f = end_f1[learn::ModelKind::OnlineForest];
    const double k = end_f1[learn::ModelKind::WindowKnn];
    const double h = end_f1[learn::ModelKind::HoeffdingTree];
    v.check(f >= k - 0.03 && k >= h - 0.03,
            fmt::format("end F1 forest {:.3f} >= knn {:.3f} >= tree {:.3f} within 0.03", f, k, h));
    v.check(slowest <= 300.0, fmt::format("slowest run {:.1f} s (limit 300 s)", slowest));
    return v;
}

Verdict importance(const std::map<Key, std::vector<const Job*>>& g, int seeds) {
    Verdict v{2, "feature importance ordering"};
    const auto& runs = g.at({"crowdshipping", "not", "forest"});
    std::array<double, 3> cat{};
    learn::FeatureArray feat{};
    int top_time = 0;
    std::map<std::string, int> top;
    for (const auto* j : runs) {
        if (!j->result.feature_importance)
            continue;
        const auto& w = *j->result.feature_importance;
        const auto c = learn::aggregate_importance(w);
        for (std::size_t i = 0; i < 3; ++i)
            cat[i] += c[i] / static_cast<double>(runs.size());
        for (std::size_t i = 0; i < learn::kNumFeatures; ++i)
            feat[i] += w[i] / static_cast<double>(runs.size());
        const auto best = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
        ++top[std::string(learn::feature_name(best))];
        top_time += learn::feature_name(best) == "remaining_time_s";
    }
    const double cap = cat[0], parcel = cat[1], env = cat[2];
    v.check(parcel > env && env > cap,
            fmt::format("mean categories parcel_state {:.3f} > environment {:.3f} > capability {:.3f}",
                        parcel, env, cap));
    const int need = (5 * seeds + 5) / 6;
    v.check(top_time >= need, fmt::format("remaining_time_s ranked first on {}/{} seeds (need {})",
                                          top_time, seeds, need));
    std::string s = "mean weights:";
    for (std::size_t i = 0; i < learn::kNumFeatures; ++i)
        s += fmt::format(" {}={:.3f}", learn::feature_name(i), feat[i]);
    v.note(s);
    s = "top feature counts:";
    for (const auto& [name, n] : top)
        s += fmt::format(" {}={}", name, n);
    v.note(s);
    return v;
}

Verdict transfer_benefit(const std::map<Key, std::vector<const Job*>>& g) {
    Verdict v{3, "collaborative transfer benefit"};
    for (auto m : kLearners) {
        const std::string name(learn::to_string(m));
        const auto& base = g.at({"crowdshipping", "not", name});
        const auto& collab = g.at({"crowdshipping", "collaborative", name});
        const double d0 = mean(column(base, [](const auto& r) { return r.delay_rate; }));
        const double d1 = mean(column(collab, [](const auto& r) { return r.delay_rate; }));
        const double c0 = mean(column(base, [](const auto& r) { return r.mean_completion_s; }));
        const double c1 = mean(column(collab, [](const auto& r) { return r.mean_completion_s; }));
        v.check(d1 <= 0.65 * d0, fmt::format("{}: delay {:.2f}% vs Not {:.2f}% (ratio {:.3f}, limit 0.65)",
                                            name, 100 * d1, 100 * d0, d0 > 0 ? d1 / d0 : 0.0));
        v.check(c1 <= 0.85 * c0,
                fmt::format("{}: completion {:.2f} min vs Not {:.2f} min (ratio {:.3f}, limit 0.85)",
                            name, c1 / 60, c0 / 60, c0 > 0 ? c1 / c0 : 0.0));
        int broken = 0;
        double transfers = 0.0, reassigned = 0.0;
        for (const auto* j : collab) {
            const auto& r = j->result;
            broken += r.in_time_after_transfer + r.delayed_after_transfer != r.n_reassigned_tasks;
            transfers += r.n_transfers / static_cast<double>(collab.size());
            reassigned += r.n_reassigned_tasks / static_cast<double>(collab.size());
        }
        v.check(broken == 0, fmt::format("{}: post-transfer split exact in every run ({} broken)",
                                         name, broken));
        v.note(fmt::format("{}: mean transfers {:.0f}, reassigned tasks {:.0f}", name, transfers,
                           reassigned));
    }
    return v;
}

const char* kSensingStrategies[] = {"not", "random", "forced", "att"};

Verdict strategy_ordering(const std::map<Key, std::vector<const Job*>>& g) {
    Verdict v{4, "crowdsensing strategy ordering"};
    for (int sc = 1; sc <= 3; ++sc) {
        const std::string name = "scenario" + std::to_string(sc);
        std::map<std::string, double> d;
        for (const char* st : kSensingStrategies)
            d[st] = mean(column(g.at({name, st, "forest"}), [](const auto& r) { return r.delay_rate; }));
        v.check(d["forced"] <= d["att"] && d["att"] < d["random"] && d["att"] < d["not"],
                fmt::format("{}: Forced {:.2f}% <= ATT {:.2f}% < Random {:.2f}%, Not {:.2f}%", name,
                            100 * d["forced"], 100 * d["att"], 100 * d["random"], 100 * d["not"]));
        if (sc == 1)
            v.check(d["att"] <= 0.05, fmt::format("scenario1: ATT delay {:.2f}% <= 5%", 100 * d["att"]));
    }
    return v;
}

Verdict profit_ordering(const std::map<Key, std::vector<const Job*>>& g) {
    Verdict v{5, "profit ordering"};
    std::map<std::string, double> p;
    std::map<std::string, double> frac;
    for (const char* st : kSensingStrategies) {
        const auto& runs = g.at({"scenario1", st, "forest"});
        p[st] = mean(column(runs, [](const auto& r) { return r.mean_profit; }));
        std::vector<sim::RunResult> rs;
        for (const auto* j : runs)
            rs.push_back(j->result);
        frac[st] = sim::summarize(rs).frac_nonpositive;
    }
    v.check(p["att"] > p["forced"] && p["forced"] > 0 && 0 > p["random"] && p["random"] > p["not"],
            fmt::format("mean profit ATT {:.3f} > Forced {:.3f} > 0 > Random {:.3f} > Not {:.3f} EUR",
                        p["att"], p["forced"], p["random"], p["not"]));
    v.check(frac["att"] < 0.5 * frac["forced"],
            fmt::format("profit <= 0: ATT {:.1f}% < half of Forced {:.1f}%", 100 * frac["att"],
                        100 * frac["forced"]));
    v.note(fmt::format("profit <= 0: Random {:.1f}%, Not {:.1f}%", 100 * frac["random"],
                       100 * frac["not"]));
    return v;
}

Verdict vickrey() {
    Verdict v{6, "Vickrey truthfulness"};
    const auto t0 = Clock::now();
    Rng rng(20240601);
    long improvements = 0, deviations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const int n = 1 + static_cast<int>(uniform(rng, 0, 8));
        std::vector<coord::Bid> bids;
        for (int i = 0; i < n; ++i)
            bids.push_back({fmt::format("w{:02d}", i), uniform(rng, 0, 10), i});
        const int dev = static_cast<int>(uniform(rng, 0, n));
        const double value = bids[static_cast<std::size_t>(dev)].amount;
        auto utility = [&](const std::vector<coord::Bid>& bs) {
            const auto r = coord::resolve_auction(bs);
            return r && r->worker == dev ? value - r->price : 0.0;
        };
        const double truthful = utility(bids);
        for (int k = 0; k <= 20; ++k) {
            auto alt = bids;
            alt[static_cast<std::size_t>(dev)].amount = 10.0 * k / 20.0;
            ++deviations;
            improvements += utility(alt) > truthful;
        }
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    v.check(improvements == 0, fmt::format("{} of {} deviations improved on truthful bidding",
                                           improvements, deviations));
    v.check(secs <= 30.0, fmt::format("{:.2f} s (limit 30 s)", secs));
    return v;
}

Verdict oracles(const std::vector<Job>& jobs) {
    Verdict v{7, "oracle equivalences"};

    // Metrics against a recount of the confusion log.
    {
        Rng rng(7);
        learn::OnlineForest model(learn::ForestParams{}, 3);
        learn::PrequentialEvaluator ev(100);
        std::vector<std::pair<learn::PredictionKey, learn::Label>> queue;
        for (int i = 0; i < 5000; ++i) {
            learn::FeatureVector x;
            x.remaining_dist_m = uniform(rng, 0, 3000);
            x.remaining_time_s = uniform(rng, 0, 1000);
            x.speed_mean = uniform(rng, 1, 9);
            const bool late = x.remaining_dist_m / x.speed_mean > x.remaining_time_s;
            learn::PredictionKey k{"w", std::to_string(i), 0};
            ev.issue(model, k, x, i);
            queue.emplace_back(k, late ? learn::Label::Delayed : learn::Label::NotDelayed);
            if (queue.size() > 30) {
                ev.resolve(queue.front().first, queue.front().second, model);
                queue.erase(queue.begin());
            }
        }
        std::uint64_t tp = 0, fp = 0, fn = 0;
        for (const auto& [p, t] : ev.log()) {
            tp += p == learn::Label::Delayed && t == learn::Label::Delayed;
            fp += p == learn::Label::Delayed && t == learn::Label::NotDelayed;
            fn += p == learn::Label::NotDelayed && t == learn::Label::Delayed;
        }
        const auto a = ev.metrics();
        const auto b = learn::classification_metrics(tp, fp, fn);
        v.check(ev.tp() == tp && ev.fp() == fp && ev.fn() == fn && a.f1 == b.f1 &&
                    a.precision == b.precision && a.recall == b.recall,
                fmt::format("metrics equal the log recount exactly (F1 {:.4f})", a.f1));
    }

    // A one-tree forest without bagging is the tree itself.
    {
        Rng rng(11);
        learn::ForestParams fp;
        fp.n_trees = 1;
        fp.poisson_weighting = false;
        fp.tree.max_features = 0;
        const std::uint64_t seed = 5;
        learn::OnlineForest forest(fp, seed);
        auto tp = fp.tree;
        tp.seed = derive_seed(seed, 1);
        learn::HoeffdingTree tree(tp);
        long differ = 0;
        for (int i = 0; i < 20000; ++i) {
            learn::FeatureVector x;
            x.speed_mean = uniform(rng, 1, 9);
            x.remaining_dist_m = uniform(rng, 0, 3000);
            x.remaining_time_s = uniform(rng, 0, 1000);
            x.dist_jam_m = uniform(rng, 0, 300);
            const double a = forest.predict_proba(x), b = tree.predict_proba(x);
            differ += std::memcmp(&a, &b, sizeof a) != 0;
            const auto y = x.remaining_dist_m / x.speed_mean + x.dist_jam_m > x.remaining_time_s
                               ? learn::Label::Delayed
                               : learn::Label::NotDelayed;
            forest.learn_one(x, y);
            tree.learn_one(x, y);
        }
        v.check(differ == 0 && forest.feature_importance() == tree.feature_importance(),
                fmt::format("forest(n=1) bit-equal to the tree over 20000 items ({} splits, {} differ)",
                            tree.n_splits(), differ));
    }

    // Subadditivity of the cost function.
    {
        Rng rng(13);
        econ::CostParams costs;
        const geo::Location c{40.4168, -3.7038};
        auto pt = [&] { return geo::travel(c, uniform(rng, 0, 6.2832), uniform(rng, 0, 2000)); };
        int violations = 0;
        for (int i = 0; i < 1000; ++i) {
            agents::WorkerAgent w;
            w.mode = static_cast<traces::Mode>(i % 3);
            w.position = pt();
            w.route = {{pt()}};
            std::vector<geo::Location> a{pt()}, b{pt()};
            a.push_back(geo::travel(a[0], uniform(rng, 0, 6.2832), 500));
            b.push_back(geo::travel(b[0], uniform(rng, 0, 6.2832), 500));
            const std::vector<econ::Chain> both{a, b}, oa{a}, ob{b};
            violations += econ::cost(w, both, costs) >
                          econ::cost(w, oa, costs) + econ::cost(w, ob, costs) + 1e-12;
        }
        v.check(violations == 0,
                fmt::format("cost subadditive on 1000 random instances ({} violations)", violations));
    }

    double worst = 0.0;
    for (const auto& j : jobs)
        worst = std::max(worst, std::abs(j.result.conservation_error));
    v.check(worst < 1e-9, fmt::format("money conserved in all {} runs (max |error| {:.3g} EUR)",
                                      jobs.size(), worst));
    return v;
}

Verdict determinism(const std::vector<Job>& jobs, int jobs_setting) {
    Verdict v{8, "determinism"};
    // Re-run a sample sequentially and with three threads; all must match the batch.
    std::vector<Job> again, threaded;
    for (std::size_t i = 0; i < jobs.size(); i += std::max<std::size_t>(1, jobs.size() / 6)) {
        again.push_back({jobs[i].scenario, {}, {}, 0.0});
        threaded.push_back({jobs[i].scenario, {}, {}, 0.0});
    }
    run_all(again, 1);
    run_all(threaded, 3);
    int mismatch = 0;
    for (std::size_t i = 0, k = 0; i < jobs.size() && k < again.size();
         i += std::max<std::size_t>(1, jobs.size() / 6), ++k)
        mismatch += again[k].json != jobs[i].json || threaded[k].json != jobs[i].json;
    v.check(mismatch == 0,
            fmt::format("{} runs byte-identical across --jobs {}, 1 and 3 ({} mismatches)",
                        again.size(), jobs_setting, mismatch));
    return v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    int seeds = 30;
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    bool strict = false;
    std::string only;
    std::string report_path;
    app.add_option("--seeds", seeds, "Seeds per configuration")->check(CLI::PositiveNumber);
    app.add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
    app.add_flag("--strict", strict, "Exit 1 when any criterion fails");
    app.add_option("--only", only, "Comma-separated criterion numbers");
    app.add_option("--report", report_path, "Also write the verdicts to this file");
    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::err);

    std::set<int> wanted;
    {
        std::stringstream ss(only);
        for (std::string s; std::getline(ss, s, ',');)
            if (!s.empty())
                wanted.insert(std::stoi(s));
    }
    auto want = [&](int id) { return wanted.empty() || wanted.contains(id); };
    const bool need_shipping = want(1) || want(2) || want(3) || want(7) || want(8);
    const bool need_sensing = want(4) || want(5) || want(7) || want(8);

    std::vector<Job> batch;
    for (int seed = 1; seed <= seeds; ++seed) {
        if (need_shipping)
            for (auto m : kLearners) {
                batch.push_back({shipping(sim::StrategyKind::Not, m, seed), {}, {}, 0.0});
                if (want(3) || want(7) || want(8))
                    batch.push_back({shipping(sim::StrategyKind::Collaborative, m, seed), {}, {}, 0.0});
            }
        if (need_sensing)
            for (int sc = 1; sc <= 3; ++sc) {
                if (!want(4) && sc > 1 && !want(7) && !want(8))
                    continue;
                for (auto st : {sim::StrategyKind::Not, sim::StrategyKind::Random,
                                sim::StrategyKind::Forced, sim::StrategyKind::Att})
                    batch.push_back({sensing(sc, st, seed), {}, {}, 0.0});
            }
    }
    const auto t0 = Clock::now();
    std::cerr << fmt::format("running {} simulations on {} thread(s)\n", batch.size(), jobs);
    run_all(batch, jobs);
    std::cerr << fmt::format("simulations took {:.0f} s\n",
                             std::chrono::duration<double>(Clock::now() - t0).count());
    const auto g = group(batch);

    std::vector<Verdict> verdicts;
    if (want(1))
        verdicts.push_back(convergence(g, seeds));
    if (want(2))
        verdicts.push_back(importance(g, seeds));
    if (want(3))
        verdicts.push_back(transfer_benefit(g));
    if (want(4))
        verdicts.push_back(strategy_ordering(g));
    if (want(5))
        verdicts.push_back(profit_ordering(g));
    if (want(6))
        verdicts.push_back(vickrey());
    if (want(7))
        verdicts.push_back(oracles(batch));
    if (want(8))
        verdicts.push_back(determinism(batch, jobs));

    int failed = 0;
    std::ostringstream out;
    for (const auto& v : verdicts) {
        out << fmt::format("{} {} {}\n", v.pass ? "PASS" : "FAIL", v.id, v.title);
        for (const auto& d : v.details)
            out << "    " << d << "\n";
        failed += !v.pass;
    }
    out << fmt::format("{} of {} criteria passed ({} seeds)\n", verdicts.size() - failed,
                       verdicts.size(), seeds);
    std::cout << out.str() << std::flush;
    if (!report_path.empty())
        std::ofstream(report_path) << out.str();
    return strict && failed > 0 ? 1 : 0;
}
