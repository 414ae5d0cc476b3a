#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "crowdswap/config.hpp"
#include "crowdswap/coord.hpp"
#include "crowdswap/error.hpp"
#include "crowdswap/geo.hpp"
#include "crowdswap/learn.hpp"
#include "crowdswap/report.hpp"
#include "crowdswap/sim.hpp"

namespace py = pybind11;
using namespace crowdswap;

namespace {

sim::Scenario pick(const std::string& path, const std::string& variant) {
    const auto cfg = config::load_config(path);
    return variant.empty() ? cfg.scenario : cfg.find(variant);
}

void override(sim::Scenario& s, std::optional<std::uint64_t> seed, const std::string& strategy,
              const std::string& model) {
    if (seed)
        s.seed = *seed;
    if (!strategy.empty()) {
        const auto k = sim::parse_strategy(strategy);
        if (!k)
            throw py::value_error("unknown strategy: " + strategy);
        s.strategy.kind = *k;
    }
    if (!model.empty()) {
        const auto k = learn::parse_model_kind(model);
        if (!k)
            throw py::value_error("unknown model: " + model);
        s.predictor.model.kind = *k;
    }
}

std::string run_json(sim::Scenario s) {
    s.record_events = false;
    sim::RunResult r;
    {
        py::gil_scoped_release release;
        r = sim::run(s);
    }
    return report::to_json(r, -1);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Crowd task-swapping simulator";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def(
        "simulate_config",
        [](const std::string& path, const std::string& variant, std::optional<std::uint64_t> seed,
           const std::string& strategy, const std::string& model) {
            auto s = pick(path, variant);
            override(s, seed, strategy, model);
            return run_json(std::move(s));
        },
        py::arg("path"), py::arg("variant") = "", py::arg("seed") = py::none(),
        py::arg("strategy") = "", py::arg("model") = "",
        "Run one scenario from a YAML config and return the result as JSON text.");

    m.def(
        "simulate_default",
        [](const std::string& kind, int variant, std::optional<std::uint64_t> seed,
           const std::string& strategy, const std::string& model) {
            sim::Scenario s;
            if (kind == "crowdshipping")
                s = sim::default_crowdshipping();
            else if (kind == "crowdsensing")
                s = sim::default_crowdsensing(variant);
            else
                throw py::value_error("unknown scenario kind: " + kind);
            override(s, seed, strategy, model);
            return run_json(std::move(s));
        },
        py::arg("kind"), py::arg("variant") = 1, py::arg("seed") = py::none(),
        py::arg("strategy") = "", py::arg("model") = "");

    m.def(
        "distance_m",
        [](double lat1, double lon1, double lat2, double lon2) {
            return geo::distance_m({lat1, lon1}, {lat2, lon2});
        },
        py::arg("lat1"), py::arg("lon1"), py::arg("lat2"), py::arg("lon2"));

    m.def(
        "classification_metrics",
        [](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
            const auto r = learn::classification_metrics(tp, fp, fn);
            return py::make_tuple(r.precision, r.recall, r.f1);
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"),
        "Precision, recall and F1 of the delayed class.");

    m.def(
        "resolve_auction",
        [](const std::vector<std::pair<std::string, double>>& bids) -> py::object {
            std::vector<coord::Bid> bs;
            for (std::size_t i = 0; i < bids.size(); ++i)
                bs.push_back({bids[i].first, bids[i].second, static_cast<int>(i)});
            const auto r = coord::resolve_auction(bs);
            if (!r)
                return py::none();
            return py::make_tuple(r->winner, r->price);
        },
        py::arg("bids"), "Second-price sealed-bid auction over (worker_id, amount) pairs.");
}
