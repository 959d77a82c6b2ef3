#pragma once

#include <iosfwd>
#include <string>

#include "cangat/graph.hpp"

namespace cangat {

// Compact little-endian binary container for a WindowDataset ("CGGR" magic),
// plus a line-oriented text form for eyeballing and diffing.  read_graphs
// sniffs the magic to pick the right decoder.

void write_graphs_binary(const WindowDataset& ds, std::ostream& out);
void write_graphs_binary(const WindowDataset& ds, const std::string& path);

void write_graphs_text(const WindowDataset& ds, std::ostream& out);
void write_graphs_text(const WindowDataset& ds, const std::string& path);

WindowDataset read_graphs(std::istream& in);
WindowDataset read_graphs(const std::string& path);

} // namespace cangat
