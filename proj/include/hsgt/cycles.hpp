#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace hsgt::graph {

/// adjacency[v] lists the successors of v.
using Adjacency = std::vector<std::vector<std::size_t>>;

/// Enumerates every elementary cycle of a digraph (Johnson, 1975). Each cycle
/// is reported once as a node sequence starting at its smallest node; the
/// closing edge back to the first node is implicit. The visitor returns false
/// to stop the enumeration early. Returns the number of cycles visited.
std::size_t for_each_simple_cycle(const Adjacency& adjacency,
                                  const std::function<bool(const std::vector<std::size_t>&)>& visit);

}  // namespace hsgt::graph
