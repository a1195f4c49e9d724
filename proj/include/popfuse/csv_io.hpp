#pragma once

// CSV import/export for the distribution types.
//
//   Marginal           bin_lo,bin_hi,mass
//   SelectionFunction  bin_lo,bin_hi,category,prob
//   BinnedJoint        bin_lo,bin_hi,category,mass
//
// A header row is required. Numbers are written in shortest round-trip form,
// so writing and reading back reproduces every edge and mass bit for bit.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "popfuse/dist.hpp"

namespace popfuse {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

double parse_double(std::string_view text);

/// Header plus rows of comma-separated fields, whitespace-trimmed.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Throws Parse on a missing header or ragged rows. Blank lines are skipped.
CsvTable read_csv(std::istream& in);

void write_marginal_csv(std::ostream& out, const Marginal& dist);
void write_selection_csv(std::ostream& out, const SelectionFunction& sel);
void write_joint_csv(std::ostream& out, const BinnedJoint& joint);

Marginal read_marginal_csv(std::istream& in);
SelectionFunction read_selection_csv(std::istream& in);
BinnedJoint read_joint_csv(std::istream& in);

void save_marginal(const std::filesystem::path& path, const Marginal& dist);
void save_selection(const std::filesystem::path& path, const SelectionFunction& sel);
void save_joint(const std::filesystem::path& path, const BinnedJoint& joint);

Marginal load_marginal(const std::filesystem::path& path);
SelectionFunction load_selection(const std::filesystem::path& path);
BinnedJoint load_joint(const std::filesystem::path& path);

/// Writes `content` to `path`, creating parent directories. Throws Io.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace popfuse
