#include "crowdswap/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace crowdswap::report {

using nlohmann::ordered_json;

namespace {

ordered_json stat(const sim::Stat& s) {
    return {{"mean", s.mean}, {"std", s.std}};
}

} // namespace

std::string to_json(const sim::RunResult& r, int indent) {
    ordered_json j;
    j["scenario"] = r.scenario;
    j["kind"] = r.kind;
    j["strategy"] = r.strategy;
    j["predictor"] = r.predictor;
    j["seed"] = r.seed;
    j["n_workers"] = r.n_workers;
    j["n_tasks"] = r.n_tasks;
    j["n_in_time"] = r.n_in_time;
    j["n_late"] = r.n_late;
    j["n_expired"] = r.n_expired;
    j["delay_rate"] = r.delay_rate;
    j["mean_completion_s"] = r.mean_completion_s;
    j["n_transfers"] = r.n_transfers;
    j["n_reassigned_tasks"] = r.n_reassigned_tasks;
    j["in_time_after_transfer"] = r.in_time_after_transfer;
    j["delayed_after_transfer"] = r.delayed_after_transfer;
    j["n_auctions"] = r.n_auctions;
    j["n_incidents"] = r.n_incidents;
    j["mean_profit"] = r.mean_profit;
    j["frac_nonpositive"] = r.frac_nonpositive;
    j["money"] = {{"rewards", r.total_rewards},
                  {"penalties", r.total_penalties},
                  {"costs", r.total_costs},
                  {"net_payments", r.total_payments},
                  {"conservation_error", r.conservation_error}};
    j["prediction"] = {{"n_resolved", r.n_predictions},
                       {"precision", r.prediction.precision},
                       {"recall", r.prediction.recall},
                       {"f1", r.prediction.f1}};
    if (r.feature_importance) {
        ordered_json fi;
        for (std::size_t i = 0; i < learn::kNumFeatures; ++i)
            fi[std::string(learn::feature_name(i))] = (*r.feature_importance)[i];
        j["feature_importance"] = fi;
        const auto cat = learn::aggregate_importance(*r.feature_importance);
        ordered_json ci;
        for (std::size_t c = 0; c < 3; ++c)
            ci[std::string(learn::to_string(static_cast<learn::FeatureCategory>(c)))] = cat[c];
        j["category_importance"] = ci;
    }
    ordered_json hist = ordered_json::array();
    for (const auto& h : r.f1_history)
        hist.push_back({h.n_seen, h.f1});
    j["f1_history"] = hist;
    ordered_json profits = ordered_json::array();
    for (const auto& p : r.profits)
        profits.push_back({{"worker", p.worker_id}, {"profit", p.profit}});
    j["profits"] = profits;
    j["end_time_s"] = r.end_time_s;
    return j.dump(indent);
}

std::string to_json(const sim::Report& r, int indent) {
    ordered_json j;
    j["scenario"] = r.scenario;
    j["strategy"] = r.strategy;
    j["predictor"] = r.predictor;
    j["n_runs"] = r.n_runs;
    j["delay_rate"] = stat(r.delay_rate);
    j["mean_completion_s"] = stat(r.mean_completion_s);
    j["n_transfers"] = stat(r.n_transfers);
    j["n_reassigned_tasks"] = stat(r.n_reassigned_tasks);
    j["mean_profit"] = stat(r.mean_profit);
    j["f1"] = stat(r.f1);
    j["frac_nonpositive"] = r.frac_nonpositive;
    j["pooled_profits"] = r.pooled_profits;
    return j.dump(indent);
}

std::string events_jsonl(const sim::RunResult& r) {
    std::string out;
    for (const auto& e : r.events) {
        out += e;
        out += '\n';
    }
    return out;
}

std::string stream_log_csv(const sim::RunResult& r) {
    std::string out = "n_seen,precision,recall,f1\n";
    for (const auto& h : r.f1_history)
        out += fmt::format("{},{},{},{}\n", h.n_seen, h.precision, h.recall, h.f1);
    return out;
}

std::string comparison_csv(std::span<const sim::Report> reports) {
    std::string out =
        "scenario,strategy,predictor,runs,delay_pct,delay_pct_std,completion_min,"
        "completion_min_std,transfers,reassigned,mean_profit,mean_profit_std,frac_nonpositive\n";
    for (const auto& r : reports)
        out += fmt::format("{},{},{},{},{:.4f},{:.4f},{:.4f},{:.4f},{:.2f},{:.2f},{:.4f},{:.4f},{:.4f}\n",
                           r.scenario, r.strategy, r.predictor, r.n_runs, 100.0 * r.delay_rate.mean,
                           100.0 * r.delay_rate.std, r.mean_completion_s.mean / 60.0,
                           r.mean_completion_s.std / 60.0, r.n_transfers.mean,
                           r.n_reassigned_tasks.mean, r.mean_profit.mean, r.mean_profit.std,
                           r.frac_nonpositive);
    return out;
}

namespace {

constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759",
                                    "#76b7b2", "#edc948", "#b07aa1", "#9c755f"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Frame {
    double width = 720, height = 420;
    double left = 70, right = 150, top = 40, bottom = 60;
    double lo = 0, hi = 1; // y range

    double plot_w() const { return width - left - right; }
    double plot_h() const { return height - top - bottom; }
    double y(double v) const { return top + plot_h() * (1.0 - (v - lo) / (hi - lo)); }
};

// Rounds a range outwards to a readable step.
std::pair<double, double> nice_range(double lo, double hi) {
    if (lo == hi) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double step = std::pow(10.0, std::floor(std::log10((hi - lo) / 5.0)));
    return {std::floor(lo / step) * step, std::ceil(hi / step) * step};
}

void axes(std::ostringstream& os, const Frame& f, const std::string& title,
          const std::string& y_label) {
    os << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" )"
                      R"(font-family="sans-serif" font-size="12">)"
                      "\n",
                      f.width, f.height);
    os << fmt::format(R"(<rect width="{}" height="{}" fill="white"/>)"
                      "\n",
                      f.width, f.height);
    os << fmt::format(R"(<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>)"
                      "\n",
                      f.left + f.plot_w() / 2, escape(title));
    os << fmt::format(R"svg(<text transform="translate(16,{}) rotate(-90)" text-anchor="middle">{}</text>)svg"
                      "\n",
                      f.top + f.plot_h() / 2, escape(y_label));
    for (int i = 0; i <= 5; ++i) {
        const double v = f.lo + (f.hi - f.lo) * i / 5.0;
        const double yy = f.y(v);
        os << fmt::format(R"(<line x1="{}" y1="{:.2f}" x2="{}" y2="{:.2f}" stroke="#ddd"/>)"
                          "\n",
                          f.left, yy, f.left + f.plot_w(), yy);
        os << fmt::format(R"(<text x="{}" y="{:.2f}" text-anchor="end">{:.3g}</text>)"
                          "\n",
                          f.left - 6, yy + 4, v);
    }
    os << fmt::format(R"(<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>)"
                      "\n",
                      f.left, f.top, f.top + f.plot_h());
}

void legend(std::ostringstream& os, const Frame& f, const std::vector<std::string>& labels) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double yy = f.top + 10 + 20.0 * static_cast<double>(i);
        os << fmt::format(R"(<rect x="{}" y="{}" width="12" height="12" fill="{}"/>)"
                          "\n",
                          f.width - f.right + 15, yy, kPalette[i % 8]);
        os << fmt::format(R"(<text x="{}" y="{}">{}</text>)"
                          "\n",
                          f.width - f.right + 32, yy + 10, escape(labels[i]));
    }
}

} // namespace

std::string bar_chart_svg(const std::string& title, const std::string& y_label,
                          const std::vector<std::string>& groups,
                          const std::vector<BarSeries>& series) {
    Frame f;
    double lo = 0.0, hi = 0.0;
    for (const auto& s : series)
        for (double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    std::tie(f.lo, f.hi) = nice_range(lo, hi);

    std::ostringstream os;
    axes(os, f, title, y_label);
    const double gw = f.plot_w() / std::max<std::size_t>(1, groups.size());
    const double bw = gw * 0.8 / std::max<std::size_t>(1, series.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double gx = f.left + gw * static_cast<double>(g);
        os << fmt::format(R"(<text x="{:.2f}" y="{}" text-anchor="middle">{}</text>)"
                          "\n",
                          gx + gw / 2, f.top + f.plot_h() + 20, escape(groups[g]));
        for (std::size_t s = 0; s < series.size(); ++s) {
            if (g >= series[s].values.size())
                continue;
            const double v = series[s].values[g];
            const double y0 = f.y(0.0), y1 = f.y(v);
            os << fmt::format(
                R"(<rect x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="{}"><title>{}: {:.4g}</title></rect>)"
                "\n",
                gx + gw * 0.1 + bw * static_cast<double>(s), std::min(y0, y1), bw,
                std::abs(y1 - y0), kPalette[s % 8], escape(series[s].label), v);
        }
    }
    os << fmt::format(R"(<line x1="{}" y1="{:.2f}" x2="{}" y2="{:.2f}" stroke="black"/>)"
                      "\n",
                      f.left, f.y(0.0), f.left + f.plot_w(), f.y(0.0));
    std::vector<std::string> labels;
    for (const auto& s : series)
        labels.push_back(s.label);
    legend(os, f, labels);
    os << "</svg>\n";
    return os.str();
}

std::string cdf_chart_svg(const std::string& title, const std::string& x_label,
                          const std::vector<CdfSeries>& series) {
    Frame f;
    f.lo = 0.0;
    f.hi = 1.0;
    double xlo = 0.0, xhi = 0.0;
    bool any = false;
    for (const auto& s : series)
        if (!s.sorted.empty()) {
            xlo = any ? std::min(xlo, s.sorted.front()) : s.sorted.front();
            xhi = any ? std::max(xhi, s.sorted.back()) : s.sorted.back();
            any = true;
        }
    std::tie(xlo, xhi) = nice_range(xlo, xhi);
    auto x = [&](double v) { return f.left + f.plot_w() * (v - xlo) / (xhi - xlo); };

    std::ostringstream os;
    axes(os, f, title, "cumulative fraction");
    for (int i = 0; i <= 5; ++i) {
        const double v = xlo + (xhi - xlo) * i / 5.0;
        os << fmt::format(R"(<text x="{:.2f}" y="{}" text-anchor="middle">{:.3g}</text>)"
                          "\n",
                          x(v), f.top + f.plot_h() + 18, v);
    }
    os << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)"
                      "\n",
                      f.left + f.plot_w() / 2, f.height - 15, escape(x_label));
    if (xlo < 0.0 && xhi > 0.0)
        os << fmt::format(R"(<line x1="{0:.2f}" y1="{1}" x2="{0:.2f}" y2="{2}" stroke="#999" stroke-dasharray="4 3"/>)"
                          "\n",
                          x(0.0), f.top, f.top + f.plot_h());
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& v = series[s].sorted;
        if (v.empty())
            continue;
        std::string pts = fmt::format("{:.2f},{:.2f}", x(xlo), f.y(0.0));
        const double n = static_cast<double>(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            pts += fmt::format(" {:.2f},{:.2f}", x(v[i]), f.y(static_cast<double>(i) / n));
            pts += fmt::format(" {:.2f},{:.2f}", x(v[i]), f.y(static_cast<double>(i + 1) / n));
        }
        pts += fmt::format(" {:.2f},{:.2f}", x(xhi), f.y(1.0));
        os << fmt::format(R"(<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>)"
                          "\n",
                          pts, kPalette[s % 8]);
    }
    std::vector<std::string> labels;
    for (const auto& s : series)
        labels.push_back(s.label);
    legend(os, f, labels);
    os << "</svg>\n";
    return os.str();
}

} // namespace crowdswap::report
