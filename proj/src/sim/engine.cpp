#include "crowdswap/sim.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "crowdswap/error.hpp"

namespace crowdswap::sim {

using agents::Waypoint;
using agents::WorkerAgent;
using learn::Label;
using learn::PredictionKey;

int apply_incidents(std::span<WorkerAgent> workers, std::span<const int> active,
                    double probability, double now, const IncidentConfig& cfg, Rng& rng,
                    std::vector<int>* hits) {
    int n = 0;
    for (int i : active) {
        if (!(uniform01(rng) < probability))
            continue;
        auto& w = workers[static_cast<std::size_t>(i)];
        const double d = cfg.max_duration_s > cfg.min_duration_s
                             ? uniform(rng, cfg.min_duration_s, cfg.max_duration_s)
                             : cfg.min_duration_s;
        w.immobilized_until = std::max(w.immobilized_until, now + d);
        ++n;
        if (hits)
            hits->push_back(i);
    }
    return n;
}

namespace {

// Compensated running sum for the money audit.
struct Sum {
    double s = 0.0;
    double c = 0.0;

    void add(double x) noexcept {
        const double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    double value() const noexcept { return s + c; }
};

enum class Status { Waiting, Held, InTime, Late, Expired };

struct TaskState {
    traces::TaskSpec spec;
    int next = 0;
    int holder = -1;
    Status status = Status::Waiting;
    bool labeled = false;
    bool transferred = false;
    double completed_at = 0.0;
    std::uint64_t seq = 0;
    std::vector<PredictionKey> pending;
};

long ticks_of(double period, double dt) {
    return std::max(1L, std::lround(period / dt));
}

class Engine {
public:
    explicit Engine(const Scenario& s)
        : sc_(s), rng_(s.seed),
          grid_(geo::make_grid(s.area.bbox(), s.grid.cell_size_m, s.grid.transition,
                               s.grid.initial, s.grid.update_period_s)),
          predictor_(s.predictor.model, derive_seed(s.seed, 1), s.predictor.shared) {
        load_workers();
        load_tasks();
    }

    RunResult run();

private:
    void load_workers();
    void load_tasks();

    void event(nlohmann::ordered_json j) {
        if (sc_.record_events)
            res_.events.push_back(j.dump());
    }
    void post(int w, double amount) {
        if (amount == 0.0)
            return;
        workers_[static_cast<std::size_t>(w)].ledger += amount;
        posted_[static_cast<std::size_t>(w)] = 1;
    }

    bool single_capacity() const noexcept { return sc_.kind == ScenarioKind::Crowdshipping; }
    WorkerAgent& worker(int i) { return workers_[static_cast<std::size_t>(i)]; }
    TaskState& task(int t) { return tasks_[static_cast<std::size_t>(t)]; }

    void assign_waiting(double now);
    void give(int t, int w, double now);
    void take(int t);
    void transfer(const coord::TransferEvent& ev, double now);
    void sample(int t, double now);
    void label(int t, Label y, double now);
    void complete(int t, double now);
    void advance_all(double now);
    void check_deadlines(double now);
    void strategy_step(long tick, double now);
    void finish(double now);

    std::vector<coord::Holding> holdings() const;
    std::vector<int> task_free() const;
    std::vector<econ::PlannedTask> planned_tasks(int w) const;
    double delay_prob(const WorkerAgent& w, std::span<const Waypoint> plan, int t,
                      double now) const;
    double delay_prob(int w, int t, double now) const;

    const Scenario& sc_;
    Rng rng_;
    geo::TrafficGrid grid_;
    learn::Predictor predictor_;
    learn::PrequentialEvaluator eval_;

    std::vector<WorkerAgent> workers_;
    std::vector<double> start_times_;
    std::vector<char> posted_;
    std::vector<TaskState> tasks_;
    std::vector<int> active_;
    std::vector<int> waiting_;
    std::vector<int> open_;
    double max_relative_deadline_ = 0.0;

    Sum rewards_, penalties_, costs_, paid_, received_;
    RunResult res_;
};

void Engine::load_workers() {
    std::vector<traces::Trace> rides;
    if (sc_.workers.traces_path.empty()) {
        rides = traces::synth_traces(sc_.workers.count, sc_.area, sc_.duration_s,
                                     sc_.workers.mode_mix, rng_, sc_.workers.synth);
    } else {
        auto loaded = traces::load_traces(sc_.workers.traces_path);
        if (loaded.dropped > 0)
            spdlog::warn("dropped {} malformed rides from {}", loaded.dropped,
                         sc_.workers.traces_path);
        std::size_t outside = 0;
        for (auto& r : loaded.traces) {
            const bool inside = std::all_of(r.points.begin(), r.points.end(), [&](const auto& p) {
                return grid_.bbox().contains(p.loc);
            });
            if (inside)
                rides.push_back(std::move(r));
            else
                ++outside;
        }
        if (outside > 0)
            spdlog::warn("dropped {} rides leaving the operating area", outside);
    }
    workers_.reserve(rides.size());
    for (const auto& r : rides) {
        workers_.push_back(agents::make_agent(r));
        start_times_.push_back(r.start_time);
    }
    posted_.assign(workers_.size(), 0);
}

void Engine::load_tasks() {
    std::vector<traces::TaskSpec> specs;
    if (sc_.tasks_path.empty()) {
        specs = traces::gen_tasks(sc_.tasks, sc_.area, rng_);
    } else {
        specs = traces::load_tasks(sc_.tasks_path);
        for (const auto& t : specs)
            for (const auto& loc : t.locations)
                if (!grid_.bbox().contains(loc))
                    throw ConfigError("tasks_path", "task " + t.task_id + " lies outside the area");
        std::stable_sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) {
            return a.release_time < b.release_time;
        });
    }
    tasks_.reserve(specs.size());
    for (auto& s : specs) {
        max_relative_deadline_ = std::max(max_relative_deadline_, s.deadline - s.release_time);
        tasks_.emplace_back().spec = std::move(s);
    }
}

std::vector<coord::Holding> Engine::holdings() const {
    std::vector<coord::Holding> out;
    for (int t : open_) {
        const auto& ts = tasks_[static_cast<std::size_t>(t)];
        if (ts.holder >= 0)
            out.push_back({t, ts.holder, ts.spec.task_id});
    }
    return out;
}

std::vector<int> Engine::task_free() const {
    std::vector<int> out;
    for (int i : active_)
        if (!workers_[static_cast<std::size_t>(i)].has_tasks())
            out.push_back(i);
    return out;
}

std::vector<econ::PlannedTask> Engine::planned_tasks(int w) const {
    std::vector<econ::PlannedTask> out;
    for (const auto& stop : agents::planned_stops(workers_[static_cast<std::size_t>(w)])) {
        if (!out.empty() && out.back().task == stop.task)
            continue;
        const auto& spec = tasks_[static_cast<std::size_t>(stop.task)].spec;
        econ::PlannedTask p;
        p.task = stop.task;
        p.first_index = stop.index;
        p.remaining = std::span<const geo::Location>(spec.locations)
                          .subspan(static_cast<std::size_t>(stop.index));
        p.deadline = spec.deadline;
        p.reward = spec.reward;
        p.penalty = spec.penalty;
        out.push_back(p);
    }
    return out;
}

double Engine::delay_prob(const WorkerAgent& w, std::span<const Waypoint> plan, int t,
                          double now) const {
    const auto& spec = tasks_[static_cast<std::size_t>(t)].spec;
    // A missed deadline is a known failure.
    if (now > spec.deadline)
        return 1.0;
    return predictor_.predict(w.id,
                              learn::extract_features(w, plan, t, spec.deadline, grid_, now));
}

double Engine::delay_prob(int w, int t, double now) const {
    const auto& agent = workers_[static_cast<std::size_t>(w)];
    const auto& ts = tasks_[static_cast<std::size_t>(t)];
    if (now > ts.spec.deadline)
        return 1.0;
    return predictor_.predict(
        agent.id, learn::extract_features(agent, ts.spec, t, ts.next, grid_, now));
}

void Engine::assign_waiting(double now) {
    std::vector<int> still;
    for (int t : waiting_) {
        const auto& loc = task(t).spec.locations[static_cast<std::size_t>(task(t).next)];
        int best = -1;
        double best_d = 0.0;
        for (int i : active_) {
            const auto& w = worker(i);
            if (single_capacity() && w.has_tasks())
                continue;
            const double d = geo::distance_m(w.position, loc);
            if (best < 0 || d < best_d || (d == best_d && w.id < worker(best).id)) {
                best = i;
                best_d = d;
            }
        }
        if (best < 0)
            still.push_back(t);
        else
            give(t, best, now);
    }
    waiting_ = std::move(still);
}

void Engine::give(int t, int w, double now) {
    auto& ts = task(t);
    auto& agent = worker(w);
    ts.holder = w;
    ts.status = Status::Held;
    agent.tasks.insert(std::upper_bound(agent.tasks.begin(), agent.tasks.end(), t), t);
    auto stops = agents::planned_stops(agent);
    for (auto i = static_cast<std::size_t>(ts.next); i < ts.spec.locations.size(); ++i)
        stops.push_back({ts.spec.locations[i], t, static_cast<int>(i)});
    agents::set_plan(agent, std::move(stops));
    event({{"t", now}, {"type", "assign"}, {"task", ts.spec.task_id}, {"worker", agent.id}});
    sample(t, now);
}

void Engine::take(int t) {
    auto& ts = task(t);
    auto& agent = worker(ts.holder);
    auto stops = agents::planned_stops(agent);
    std::erase_if(stops, [t](const Waypoint& s) { return s.task == t; });
    agents::set_plan(agent, std::move(stops));
    std::erase(agent.tasks, t);
    ts.holder = -1;
}

void Engine::transfer(const coord::TransferEvent& ev, double now) {
    auto& ts = task(ev.task);
    if (ev.from == ev.to || ts.holder != ev.from) {
        spdlog::warn("ignored inconsistent transfer of {}", ev.task_id);
        return;
    }
    if (sc_.predictor.transfer_labels == TransferLabels::Counterfactual && !ts.pending.empty()) {
        const auto& a = worker(ev.from);
        const auto x = learn::extract_features(a, ts.spec, ev.task, ts.next, grid_, now);
        const double v = agents::mode_speed(a.mode, geo::TrafficState::Normal, sc_.move.moto);
        const double finish = std::max(now, a.immobilized_until) + x.remaining_dist_m / v;
        const Label y = finish > ts.spec.deadline ? Label::Delayed : Label::NotDelayed;
        for (const auto& key : ts.pending)
            eval_.resolve(key, y, predictor_.model_for(key.worker_id));
    } else {
        for (const auto& key : ts.pending)
            eval_.withdraw(key);
    }
    ts.pending.clear();
    take(ev.task);
    ts.transferred = true;
    ++res_.n_transfers;
    if (ev.price != 0.0) {
        post(ev.to, -ev.price);
        post(ev.from, ev.price);
        paid_.add(ev.price);
        received_.add(ev.price);
    }
    event({{"t", now},
           {"type", "transfer"},
           {"task", ev.task_id},
           {"from", ev.from_worker},
           {"to", ev.to_worker},
           {"mechanism", coord::to_string(ev.mechanism)},
           {"price", ev.price}});
    give(ev.task, ev.to, now);
}

void Engine::sample(int t, double now) {
    auto& ts = task(t);
    if (ts.labeled || ts.holder < 0)
        return;
    const auto& agent = worker(ts.holder);
    const auto x = learn::extract_features(agent, ts.spec, t, ts.next, grid_, now);
    PredictionKey key{agent.id, ts.spec.task_id, ts.seq++};
    eval_.issue(predictor_.model_for(agent.id), key, x, now);
    ts.pending.push_back(std::move(key));
}

void Engine::label(int t, Label y, double now) {
    auto& ts = task(t);
    for (const auto& key : ts.pending)
        eval_.resolve(key, y, predictor_.model_for(key.worker_id));
    ts.pending.clear();
    ts.labeled = true;
    event({{"t", now},
           {"type", "label"},
           {"task", ts.spec.task_id},
           {"label", y == Label::Delayed ? "Delayed" : "NotDelayed"}});
}

void Engine::complete(int t, double now) {
    auto& ts = task(t);
    const int w = ts.holder;
    const bool in_time = now <= ts.spec.deadline;
    ts.status = in_time ? Status::InTime : Status::Late;
    ts.completed_at = now;
    std::erase(worker(w).tasks, t);
    ts.holder = -1;
    if (in_time) {
        post(w, ts.spec.reward);
        rewards_.add(ts.spec.reward);
    } else {
        post(w, -ts.spec.penalty);
        penalties_.add(ts.spec.penalty);
    }
    const double fixed = sc_.costs.fixed_cost_per_task;
    post(w, -fixed);
    costs_.add(fixed);
    event({{"t", now},
           {"type", "complete"},
           {"task", ts.spec.task_id},
           {"worker", worker(w).id},
           {"in_time", in_time},
           {"settled", in_time ? ts.spec.reward : -ts.spec.penalty}});
    if (!ts.labeled)
        label(t, in_time ? Label::NotDelayed : Label::Delayed, now);
    std::erase(open_, t);
}

void Engine::advance_all(double now) {
    bool retired = false;
    for (int i : active_) {
        auto& w = worker(i);
        const bool busy = w.has_tasks();
        const auto r = agents::advance(w, sc_.dt_s, grid_, now, sc_.move);
        if (busy) {
            const double c = sc_.costs.per_meter(w.mode) * std::max(0.0, r.moved_m - r.progress_m);
            if (c > 0.0) {
                post(i, -c);
                costs_.add(c);
            }
        }
        for (const auto& a : r.arrivals) {
            auto& ts = task(a.task);
            if (ts.holder != i || a.index != ts.next) {
                spdlog::debug("stale stop {}#{} reached by {}", ts.spec.task_id, a.index, w.id);
                continue;
            }
            if (++ts.next == static_cast<int>(ts.spec.locations.size()))
                complete(a.task, now);
        }
        if (!w.active) {
            retired = true;
            if (w.has_tasks())
                spdlog::warn("worker {} left with {} tasks", w.id, w.tasks.size());
        }
    }
    if (retired)
        std::erase_if(active_, [this](int i) { return !worker(i).active; });
}

void Engine::check_deadlines(double now) {
    for (int t : open_) {
        auto& ts = task(t);
        if (!ts.labeled && now >= ts.spec.deadline)
            label(t, Label::Delayed, now);
    }
}

void Engine::strategy_step(long tick, double now) {
    const auto& st = sc_.strategy;
    switch (st.kind) {
    case StrategyKind::Not:
        return;
    case StrategyKind::Random: {
        const auto hs = holdings();
        if (hs.empty())
            return;
        const auto free = task_free();
        for (const auto& ev : coord::random_step(hs, workers_, free, st.p_transfer, rng_, now))
            transfer(ev, now);
        return;
    }
    case StrategyKind::Collaborative: {
        if (tick % ticks_of(st.collaborative_period_s, sc_.dt_s) != 0)
            return;
        const auto hs = holdings();
        if (hs.empty())
            return;
        const auto free = task_free();
        const auto events = coord::collaborative_step(
            grid_, workers_, hs, free, [&](int w, int t) { return delay_prob(w, t, now); }, now);
        for (const auto& ev : events)
            transfer(ev, now);
        return;
    }
    case StrategyKind::Forced: {
        if (tick % ticks_of(st.review_period_s, sc_.dt_s) != 0)
            return;
        const auto hs = holdings();
        if (hs.empty())
            return;
        const auto candidates = single_capacity() ? task_free() : active_;
        coord::ForcedParams fp{st.forced_margin, st.neighborhood_radius_m, single_capacity()};
        const auto events = coord::forced_step(
            hs, workers_, candidates,
            [&](int w, int t) { return 1.0 - delay_prob(w, t, now); }, fp, now);
        for (const auto& ev : events)
            transfer(ev, now);
        return;
    }
    case StrategyKind::Att: {
        if (tick % ticks_of(st.review_period_s, sc_.dt_s) != 0)
            return;
        const econ::SuccessFn success = [&](const WorkerAgent& w, std::span<const Waypoint> plan,
                                            const econ::PlannedTask& p) {
            return 1.0 - delay_prob(w, plan, p.task, now);
        };
        // Auctions run one after another; each sees the outcome of the previous.
        for (const auto& h : holdings()) {
            if (task(h.task).holder != h.worker)
                continue;
            const auto& seller = worker(h.worker);
            const auto held = planned_tasks(h.worker);
            const auto pos = std::find_if(held.begin(), held.end(),
                                          [&](const auto& p) { return p.task == h.task; });
            if (pos == held.end())
                continue;
            const auto target = static_cast<std::size_t>(pos - held.begin());
            if (!coord::should_trigger_auction(seller, held, target, success, sc_.costs))
                continue;
            ++res_.n_auctions;
            std::vector<coord::Bid> bids;
            for (int b : active_) {
                if (b == h.worker)
                    continue;
                const auto& bidder = worker(b);
                if (single_capacity() && bidder.has_tasks())
                    continue;
                if (geo::distance_m(seller.position, bidder.position) > st.neighborhood_radius_m)
                    continue;
                const auto own = planned_tasks(b);
                const double eu =
                    own.empty() ? 0.0 : econ::expected_utility(bidder, own, success, sc_.costs);
                if (auto v = coord::compute_bid(bidder, own, held[target], success, sc_.costs, eu))
                    bids.push_back({bidder.id, *v, b});
            }
            const auto outcome = coord::resolve_auction(bids);
            event({{"t", now},
                   {"type", "auction"},
                   {"task", h.task_id},
                   {"seller", seller.id},
                   {"bids", bids.size()},
                   {"winner", outcome ? outcome->winner : ""},
                   {"price", outcome ? outcome->price : 0.0}});
            if (!outcome)
                continue;
            coord::TransferEvent ev{h.task_id, seller.id,       outcome->winner, now,
                                    coord::Mechanism::Auction,  outcome->price,  h.task,
                                    h.worker,                   outcome->worker};
            transfer(ev, now);
        }
        return;
    }
    }
}

void Engine::finish(double now) {
    for (int t : open_) {
        auto& ts = task(t);
        if (!ts.labeled)
            label(t, Label::Delayed, now);
        ts.status = Status::Expired;
        if (ts.holder >= 0) {
            post(ts.holder, -ts.spec.penalty);
            penalties_.add(ts.spec.penalty);
            event({{"t", now},
                   {"type", "expire"},
                   {"task", ts.spec.task_id},
                   {"worker", worker(ts.holder).id},
                   {"settled", -ts.spec.penalty}});
            std::erase(worker(ts.holder).tasks, t);
            ts.holder = -1;
        } else {
            event({{"t", now}, {"type", "expire"}, {"task", ts.spec.task_id}, {"worker", ""}});
        }
    }
    open_.clear();

    auto& r = res_;
    r.end_time_s = now;
    r.n_workers = static_cast<int>(workers_.size());
    r.n_tasks = static_cast<int>(tasks_.size());
    double completion = 0.0;
    for (const auto& ts : tasks_) {
        switch (ts.status) {
        case Status::InTime: ++r.n_in_time; break;
        case Status::Late: ++r.n_late; break;
        default: ++r.n_expired; break;
        }
        if (ts.status == Status::InTime || ts.status == Status::Late)
            completion += ts.completed_at - ts.spec.release_time;
        if (ts.transferred) {
            ++r.n_reassigned_tasks;
            if (ts.status == Status::InTime)
                ++r.in_time_after_transfer;
            else
                ++r.delayed_after_transfer;
        }
    }
    const int done = r.n_in_time + r.n_late;
    r.delay_rate = r.n_tasks > 0 ? static_cast<double>(r.n_late + r.n_expired) / r.n_tasks : 0.0;
    r.mean_completion_s = done > 0 ? completion / done : 0.0;

    Sum ledgers;
    int nonpositive = 0;
    Sum profit;
    for (std::size_t i = 0; i < workers_.size(); ++i) {
        ledgers.add(workers_[i].ledger);
        if (!posted_[i])
            continue;
        r.profits.push_back({workers_[i].id, workers_[i].ledger});
        profit.add(workers_[i].ledger);
        if (workers_[i].ledger <= 0.0)
            ++nonpositive;
    }
    if (!r.profits.empty()) {
        r.mean_profit = profit.value() / static_cast<double>(r.profits.size());
        r.frac_nonpositive = static_cast<double>(nonpositive) / static_cast<double>(r.profits.size());
    }
    r.total_rewards = rewards_.value();
    r.total_penalties = penalties_.value();
    r.total_costs = costs_.value();
    r.total_payments = received_.value() - paid_.value();
    r.conservation_error =
        ledgers.value() - (r.total_rewards - r.total_penalties - r.total_costs + r.total_payments);

    r.n_predictions = eval_.n_resolved();
    r.prediction = eval_.metrics();
    r.f1_history = eval_.f1_history();
    try {
        r.feature_importance = predictor_.feature_importance();
    } catch (const Unsupported&) {
        r.feature_importance.reset();
    }
}

RunResult Engine::run() {
    res_.scenario = sc_.name;
    res_.kind = std::string(to_string(sc_.kind));
    res_.strategy = std::string(to_string(sc_.strategy.kind));
    res_.predictor = std::string(learn::to_string(sc_.predictor.model.kind));
    res_.seed = sc_.seed;

    const double dt = sc_.dt_s;
    const long traffic_every = ticks_of(grid_.update_period_s(), dt);
    const long incident_every = ticks_of(sc_.incidents.period_s, dt);
    const long sample_every = ticks_of(sc_.predictor.sample_period_s, dt);
    const double last_release = tasks_.empty() ? 0.0 : tasks_.back().spec.release_time;
    const double horizon = std::max(sc_.duration_s, last_release);
    const double cap = horizon + 2.0 * max_relative_deadline_;

    std::size_t next_worker = 0;
    std::size_t next_task = 0;
    std::vector<int> hits;
    double now = 0.0;
    for (long tick = 0;; ++tick) {
        now = static_cast<double>(tick) * dt;
        if (tick > 0 && tick % traffic_every == 0)
            grid_.step_traffic(rng_);

        while (next_worker < workers_.size() && start_times_[next_worker] <= now) {
            worker(static_cast<int>(next_worker)).active = true;
            active_.push_back(static_cast<int>(next_worker));
            ++next_worker;
        }
        while (next_task < tasks_.size() && tasks_[next_task].spec.release_time <= now) {
            const int t = static_cast<int>(next_task++);
            event({{"t", now}, {"type", "release"}, {"task", task(t).spec.task_id}});
            waiting_.push_back(t);
            open_.push_back(t);
        }
        if (!waiting_.empty())
            assign_waiting(now);

        if (sc_.incidents.probability > 0.0 && tick % incident_every == 0) {
            hits.clear();
            res_.n_incidents += apply_incidents(workers_, active_, sc_.incidents.probability, now,
                                                sc_.incidents, rng_, &hits);
            for (int i : hits)
                event({{"t", now},
                       {"type", "incident"},
                       {"worker", worker(i).id},
                       {"until", worker(i).immobilized_until}});
        }

        advance_all(now);
        check_deadlines(now);
        if (tick % sample_every == 0)
            for (int t : open_)
                sample(t, now);
        strategy_step(tick, now);

        const bool drained = next_task == tasks_.size() && open_.empty();
        if ((now >= horizon && drained) || now >= cap)
            break;
    }
    finish(now);
    return std::move(res_);
}

} // namespace

RunResult run(const Scenario& scenario) {
    validate(scenario);
    Engine engine(scenario);
    return engine.run();
}

} // namespace crowdswap::sim
