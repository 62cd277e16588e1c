#pragma once

#include <string>
#include <vector>

#include "cgc/graph.hpp"

namespace cgc {

// Deterministic fill color for a cluster id: golden-angle hue walk at fixed
// saturation/lightness, returned as "#rrggbb".
std::string cluster_color(int cluster_id);

// Cluster map of one graph as standalone SVG text: edges as thin lines,
// one circle per node at its (col, row) position colored by its cluster id,
// plus a legend of the distinct ids. Identical inputs yield identical text.
std::string render_cluster_svg(const CellGraph& g, const std::vector<int>& cluster_ids,
                               const std::string& title);

// render_cluster_svg written to a file; unwritable paths raise IoError.
void write_cluster_svg(const std::string& path, const CellGraph& g,
                       const std::vector<int>& cluster_ids, const std::string& title);

}  // namespace cgc
