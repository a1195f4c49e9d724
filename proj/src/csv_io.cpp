#include "popfuse/csv_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace popfuse {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw Error(ErrorKind::InvalidArgument, "unformattable number");
  return std::string(buf.data(), end);
}

double parse_double(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  text = first == std::string_view::npos ? std::string_view{} : text.substr(first, text.find_last_not_of(" \t\r\n") - first + 1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw Error(ErrorKind::Parse, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::size_t parse_index(std::string_view text) {
  std::size_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw Error(ErrorKind::Parse, "not a category index: '" + std::string(text) + "'");
  }
  return value;
}

void expect_header(const CsvTable& table, std::vector<std::string> expected) {
  if (table.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw Error(ErrorKind::Parse, "expected header '" + want + "'");
  }
}

// Contiguous bins of a cell table, keyed by (bin_lo, bin_hi) then category.
struct CellTable {
  std::vector<double> edges;
  std::size_t categories = 0;
  Eigen::MatrixXd values;
};

CellTable collect_cells(const CsvTable& table) {
  std::map<std::pair<double, double>, std::map<std::size_t, double>> bins;
  for (const auto& row : table.rows) {
    const double lo = parse_double(row[0]);
    const double hi = parse_double(row[1]);
    const std::size_t cat = parse_index(row[2]);
    if (!bins[{lo, hi}].emplace(cat, parse_double(row[3])).second) {
      throw Error(ErrorKind::Parse, "duplicate cell in CSV");
    }
  }
  if (bins.empty()) throw Error(ErrorKind::Parse, "CSV has no data rows");

  CellTable out;
  out.categories = bins.begin()->second.size();
  out.values.resize(static_cast<Eigen::Index>(bins.size()),
                    static_cast<Eigen::Index>(out.categories));
  Eigen::Index i = 0;
  for (const auto& [range, cells] : bins) {
    if (out.edges.empty()) {
      out.edges.push_back(range.first);
    } else if (out.edges.back() != range.first) {
      throw Error(ErrorKind::Parse, "bins are not contiguous");
    }
    out.edges.push_back(range.second);
    if (cells.size() != out.categories || cells.rbegin()->first != out.categories - 1) {
      throw Error(ErrorKind::Parse, "every bin needs categories 0..n-1");
    }
    for (const auto& [cat, v] : cells) out.values(i, static_cast<Eigen::Index>(cat)) = v;
    ++i;
  }
  return out;
}

void write_cells(std::ostream& out, const Grid& grid, const Eigen::MatrixXd& values,
                 std::string_view value_name) {
  out << "bin_lo,bin_hi,category," << value_name << '\n';
  for (std::size_t i = 0; i < grid.bins(); ++i) {
    for (std::size_t s = 0; s < grid.categories(); ++s) {
      out << format_double(grid.lower(i)) << ',' << format_double(grid.upper(i)) << ',' << s
          << ',' << format_double(values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)))
          << '\n';
    }
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return in;
}

template <typename Fn>
void save_with(const std::filesystem::path& path, Fn&& write) {
  std::ostringstream buf;
  write(buf);
  write_text_file(path, buf.str());
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!have_header) {
      if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorKind::Parse, "row has " + std::to_string(fields.size()) +
                                        " fields, header has " +
                                        std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw Error(ErrorKind::Parse, "missing header row");
  return table;
}

void write_marginal_csv(std::ostream& out, const Marginal& dist) {
  const auto& grid = dist.grid();
  out << "bin_lo,bin_hi,mass\n";
  for (std::size_t i = 0; i < grid.bins(); ++i) {
    out << format_double(grid.lower(i)) << ',' << format_double(grid.upper(i)) << ','
        << format_double(dist[i]) << '\n';
  }
}

void write_selection_csv(std::ostream& out, const SelectionFunction& sel) {
  write_cells(out, sel.grid(), sel.prob(), "prob");
}

void write_joint_csv(std::ostream& out, const BinnedJoint& joint) {
  write_cells(out, joint.grid(), joint.mass(), "mass");
}

Marginal read_marginal_csv(std::istream& in) {
  const auto table = read_csv(in);
  expect_header(table, {"bin_lo", "bin_hi", "mass"});
  if (table.rows.empty()) throw Error(ErrorKind::Parse, "CSV has no data rows");
  std::vector<double> edges;
  Eigen::VectorXd mass(static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const double lo = parse_double(table.rows[i][0]);
    if (edges.empty()) {
      edges.push_back(lo);
    } else if (edges.back() != lo) {
      throw Error(ErrorKind::Parse, "bins are not contiguous at row " + std::to_string(i + 1));
    }
    edges.push_back(parse_double(table.rows[i][1]));
    mass(static_cast<Eigen::Index>(i)) = parse_double(table.rows[i][2]);
  }
  return Marginal(Grid(std::move(edges)), std::move(mass));
}

SelectionFunction read_selection_csv(std::istream& in) {
  const auto table = read_csv(in);
  expect_header(table, {"bin_lo", "bin_hi", "category", "prob"});
  auto cells = collect_cells(table);
  return SelectionFunction(Grid(std::move(cells.edges), cells.categories), std::move(cells.values));
}

BinnedJoint read_joint_csv(std::istream& in) {
  const auto table = read_csv(in);
  expect_header(table, {"bin_lo", "bin_hi", "category", "mass"});
  auto cells = collect_cells(table);
  return BinnedJoint(Grid(std::move(cells.edges), cells.categories), std::move(cells.values));
}

void save_marginal(const std::filesystem::path& path, const Marginal& dist) {
  save_with(path, [&](std::ostream& o) { write_marginal_csv(o, dist); });
}
void save_selection(const std::filesystem::path& path, const SelectionFunction& sel) {
  save_with(path, [&](std::ostream& o) { write_selection_csv(o, sel); });
}
void save_joint(const std::filesystem::path& path, const BinnedJoint& joint) {
  save_with(path, [&](std::ostream& o) { write_joint_csv(o, joint); });
}

Marginal load_marginal(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_marginal_csv(in);
}
SelectionFunction load_selection(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_selection_csv(in);
}
BinnedJoint load_joint(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_joint_csv(in);
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace popfuse
