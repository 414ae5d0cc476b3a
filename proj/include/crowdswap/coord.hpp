#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdswap/agents.hpp"
#include "crowdswap/econ.hpp"
#include "crowdswap/geo.hpp"
#include "crowdswap/random.hpp"

namespace crowdswap::coord {

enum class Mechanism : std::uint8_t { Collaborative, Auction, Random, Forced };

std::string_view to_string(Mechanism m) noexcept;

/// Reassignment of a held task. Indices address the caller's task and worker tables.
struct TransferEvent {
    std::string task_id;
    std::string from_worker;
    std::string to_worker;
    double time_s = 0.0;
    Mechanism mechanism = Mechanism::Collaborative;
    double price = 0.0;
    int task = -1;
    int from = -1;
    int to = -1;
};

/// A task currently held by a worker.
struct Holding {
    int task = -1;
    int worker = -1;
    std::string task_id;
};

/// Lower id wins ties everywhere.
bool id_less(const agents::WorkerAgent& a, const agents::WorkerAgent& b) noexcept;

/// Probability that `worker` delivers `task` late.
using DelayFn = std::function<double(int worker, int task)>;

/// One round of the collaborative parcel-transfer rule. Each courier compares
/// itself with the task-free candidates in its grid cell and hands the parcel
/// to the one with the lowest delay probability if that is strictly lower
/// than its own. A candidate receives at most one parcel per round.
std::vector<TransferEvent> collaborative_step(const geo::TrafficGrid& grid,
                                              std::span<const agents::WorkerAgent> workers,
                                              std::span<const Holding> couriers,
                                              std::span<const int> candidates,
                                              const DelayFn& prob_delay, double now);

// ---------------------------------------------------------------------------
// Auction-based transfers

struct Bid {
    std::string worker_id;
    double amount = 0.0;
    int worker = -1;
};

struct AuctionOutcome {
    std::string winner;
    double price = 0.0;
    int worker = -1;
};

/// Sealed-bid second-price rule: highest bid wins (ties to the lower id) and
/// pays the second-highest amount, or 0 when it is the only bid.
std::optional<AuctionOutcome> resolve_auction(std::span<const Bid> bids);

/// The seller rule: give `held[target]` away only if doing so raises expected
/// utility even when the transfer pays nothing.
bool should_trigger_auction(const agents::WorkerAgent& seller,
                            std::span<const econ::PlannedTask> held, std::size_t target,
                            const econ::SuccessFn& success, const econ::CostParams& costs);

/// Truthful valuation EU(S + task) - EU(S); nothing when it is not positive.
std::optional<double> compute_bid(const agents::WorkerAgent& bidder,
                                  std::span<const econ::PlannedTask> held,
                                  const econ::PlannedTask& task, const econ::SuccessFn& success,
                                  const econ::CostParams& costs);

/// As compute_bid, with EU(S) already known.
std::optional<double> compute_bid(const agents::WorkerAgent& bidder,
                                  std::span<const econ::PlannedTask> held,
                                  const econ::PlannedTask& task, const econ::SuccessFn& success,
                                  const econ::CostParams& costs, double eu_without);

// ---------------------------------------------------------------------------
// Baselines

/// Per task, with probability `p_transfer`, hand it to the nearest task-free
/// worker (nearest to the current holder). Draws one uniform per holding.
std::vector<TransferEvent> random_step(std::span<const Holding> tasks,
                                       std::span<const agents::WorkerAgent> workers,
                                       std::span<const int> task_free, double p_transfer,
                                       Rng& rng, double now);

/// Success probability of `worker` for `task`.
using SuccessProbFn = std::function<double(int worker, int task)>;

struct ForcedParams {
    double margin = 0.05;
    double radius_m = std::numeric_limits<double>::infinity();
    bool single_task_capacity = false;
};

/// Moves each task to the candidate with the highest success probability
/// when that beats the holder's by at least `margin`. With single task
/// capacity a candidate takes at most one task per round.
std::vector<TransferEvent> forced_step(std::span<const Holding> tasks,
                                       std::span<const agents::WorkerAgent> workers,
                                       std::span<const int> candidates,
                                       const SuccessProbFn& success, const ForcedParams& params,
                                       double now);

} // namespace crowdswap::coord
