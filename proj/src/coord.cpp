#include "crowdswap/coord.hpp"

#include <algorithm>
#include <map>
#include <vector>

namespace crowdswap::coord {

std::string_view to_string(Mechanism m) noexcept {
    switch (m) {
    case Mechanism::Collaborative: return "Collaborative";
    case Mechanism::Auction: return "Auction";
    case Mechanism::Random: return "Random";
    case Mechanism::Forced: return "Forced";
    }
    return "Collaborative";
}

bool id_less(const agents::WorkerAgent& a, const agents::WorkerAgent& b) noexcept {
    return a.id < b.id;
}

namespace {

TransferEvent make_event(const Holding& h, std::span<const agents::WorkerAgent> workers, int to,
                         Mechanism mech, double now, double price = 0.0) {
    return {h.task_id,
            workers[static_cast<std::size_t>(h.worker)].id,
            workers[static_cast<std::size_t>(to)].id,
            now,
            mech,
            price,
            h.task,
            h.worker,
            to};
}

} // namespace

std::vector<TransferEvent> collaborative_step(const geo::TrafficGrid& grid,
                                              std::span<const agents::WorkerAgent> workers,
                                              std::span<const Holding> couriers,
                                              std::span<const int> candidates,
                                              const DelayFn& prob_delay, double now) {
    std::vector<TransferEvent> events;
    if (couriers.empty() || candidates.empty())
        return events;

    std::map<std::size_t, std::vector<int>> by_cell;
    for (int c : candidates)
        by_cell[grid.flat(grid.cell_of_clamped(workers[static_cast<std::size_t>(c)].position))]
            .push_back(c);
    std::vector<char> taken(workers.size(), 0);

    for (const auto& h : couriers) {
        const auto& courier = workers[static_cast<std::size_t>(h.worker)];
        auto it = by_cell.find(grid.flat(grid.cell_of_clamped(courier.position)));
        if (it == by_cell.end())
            continue;
        int best = -1;
        double best_p = 0.0;
        for (int c : it->second) {
            if (c == h.worker || taken[static_cast<std::size_t>(c)])
                continue;
            const double p = prob_delay(c, h.task);
            if (best < 0 || p < best_p ||
                (p == best_p && id_less(workers[static_cast<std::size_t>(c)],
                                        workers[static_cast<std::size_t>(best)]))) {
                best = c;
                best_p = p;
            }
        }
        if (best < 0)
            continue;
        // F_qual = 1 - prob_delay, so the candidate must be strictly less likely late.
        if (best_p < prob_delay(h.worker, h.task)) {
            taken[static_cast<std::size_t>(best)] = 1;
            events.push_back(make_event(h, workers, best, Mechanism::Collaborative, now));
        }
    }
    return events;
}

std::optional<AuctionOutcome> resolve_auction(std::span<const Bid> bids) {
    if (bids.empty())
        return std::nullopt;
    std::vector<const Bid*> order;
    order.reserve(bids.size());
    for (const auto& b : bids)
        order.push_back(&b);
    std::sort(order.begin(), order.end(), [](const Bid* a, const Bid* b) {
        if (a->amount != b->amount)
            return a->amount > b->amount;
        return a->worker_id < b->worker_id;
    });
    AuctionOutcome out;
    out.winner = order[0]->worker_id;
    out.worker = order[0]->worker;
    out.price = order.size() > 1 ? order[1]->amount : 0.0;
    return out;
}

bool should_trigger_auction(const agents::WorkerAgent& seller,
                            std::span<const econ::PlannedTask> held, std::size_t target,
                            const econ::SuccessFn& success, const econ::CostParams& costs) {
    if (target >= held.size())
        return false;
    std::vector<econ::PlannedTask> rest;
    rest.reserve(held.size() - 1);
    for (std::size_t i = 0; i < held.size(); ++i)
        if (i != target)
            rest.push_back(held[i]);
    return econ::expected_utility(seller, rest, success, costs) >
           econ::expected_utility(seller, held, success, costs);
}

std::optional<double> compute_bid(const agents::WorkerAgent& bidder,
                                  std::span<const econ::PlannedTask> held,
                                  const econ::PlannedTask& task, const econ::SuccessFn& success,
                                  const econ::CostParams& costs, double eu_without) {
    std::vector<econ::PlannedTask> with(held.begin(), held.end());
    with.push_back(task);
    const double b = econ::expected_utility(bidder, with, success, costs) - eu_without;
    if (b > 0.0)
        return b;
    return std::nullopt;
}

std::optional<double> compute_bid(const agents::WorkerAgent& bidder,
                                  std::span<const econ::PlannedTask> held,
                                  const econ::PlannedTask& task, const econ::SuccessFn& success,
                                  const econ::CostParams& costs) {
    return compute_bid(bidder, held, task, success, costs,
                       econ::expected_utility(bidder, held, success, costs));
}

std::vector<TransferEvent> random_step(std::span<const Holding> tasks,
                                       std::span<const agents::WorkerAgent> workers,
                                       std::span<const int> task_free, double p_transfer,
                                       Rng& rng, double now) {
    std::vector<TransferEvent> events;
    std::vector<int> free(task_free.begin(), task_free.end());
    for (const auto& h : tasks) {
        if (!(uniform01(rng) < p_transfer))
            continue;
        const auto& holder = workers[static_cast<std::size_t>(h.worker)];
        int best = -1;
        double best_d = 0.0;
        for (int c : free) {
            if (c == h.worker)
                continue;
            const double d = geo::distance_m(holder.position, workers[static_cast<std::size_t>(c)].position);
            if (best < 0 || d < best_d ||
                (d == best_d && id_less(workers[static_cast<std::size_t>(c)],
                                        workers[static_cast<std::size_t>(best)]))) {
                best = c;
                best_d = d;
            }
        }
        if (best < 0)
            continue;
        free.erase(std::find(free.begin(), free.end(), best));
        events.push_back(make_event(h, workers, best, Mechanism::Random, now));
    }
    return events;
}

std::vector<TransferEvent> forced_step(std::span<const Holding> tasks,
                                       std::span<const agents::WorkerAgent> workers,
                                       std::span<const int> candidates,
                                       const SuccessProbFn& success, const ForcedParams& params,
                                       double now) {
    std::vector<TransferEvent> events;
    std::vector<char> taken(workers.size(), 0);
    for (const auto& h : tasks) {
        const auto& holder = workers[static_cast<std::size_t>(h.worker)];
        const double own = success(h.worker, h.task);
        int best = -1;
        double best_s = 0.0;
        for (int c : candidates) {
            if (c == h.worker || taken[static_cast<std::size_t>(c)])
                continue;
            const auto& cand = workers[static_cast<std::size_t>(c)];
            if (geo::distance_m(holder.position, cand.position) > params.radius_m)
                continue;
            const double s = success(c, h.task);
            if (best < 0 || s > best_s ||
                (s == best_s && id_less(cand, workers[static_cast<std::size_t>(best)]))) {
                best = c;
                best_s = s;
            }
        }
        if (best < 0 || best_s < own + params.margin)
            continue;
        if (params.single_task_capacity)
            taken[static_cast<std::size_t>(best)] = 1;
        events.push_back(make_event(h, workers, best, Mechanism::Forced, now));
    }
    return events;
}

} // namespace crowdswap::coord
