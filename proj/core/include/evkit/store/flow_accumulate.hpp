#pragma once

#include <span>

#include "evkit/event.hpp"

namespace evkit::store {

/// Displacement over [t_start, t_end] obtained by chaining per-interval flow
/// fields along each pixel's trajectory. Fully covered intervals are sampled
/// (bilinear, clamp-to-edge) at the current trajectory position; partially
/// covered boundary intervals contribute the covered fraction of the sampled
/// displacement. Once a trajectory leaves the image its displacement is
/// frozen. `flows` must be sorted and contiguous (t1 of one equals t0 of the
/// next) over the query; throws ContractError on gaps or a bad query.
FlowField accumulate_flow(std::span<const FlowField> flows, TimeUs t_start, TimeUs t_end);

}  // namespace evkit::store
