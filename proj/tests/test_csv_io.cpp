#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "popfuse/csv_io.hpp"

using namespace popfuse;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Io;
}

Grid odd_grid(std::size_t categories) {
  return Grid({-0.1, 0.1 / 3.0, 0.7, 1e-3 + 2.0, 3.141592653589793}, categories);
}

}  // namespace

TEST_CASE("shortest round-trip doubles") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) / 7.0;
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(parse_double("+2.5") == 2.5);
  CHECK(parse_double(" 1e-3 ") == 1e-3);
  CHECK(kind_of([] { parse_double("abc"); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse_double("1.5x"); }) == ErrorKind::Parse);
}

TEST_CASE("marginal round trip is exact") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd w(4);
  for (auto& x : w) x = u(rng);
  const auto m = Marginal::from_weights(odd_grid(1), w);
  std::stringstream ss;
  write_marginal_csv(ss, m);
  const auto back = read_marginal_csv(ss);
  CHECK(back.grid() == m.grid());
  CHECK(back.mass() == m.mass());
}

TEST_CASE("selection and joint round trips are exact") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd p(4, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  const SelectionFunction sel(odd_grid(3), p);
  std::stringstream s1;
  write_selection_csv(s1, sel);
  const auto sel_back = read_selection_csv(s1);
  CHECK(sel_back.grid() == sel.grid());
  CHECK(sel_back.prob() == sel.prob());

  const auto joint = BinnedJoint::from_weights(odd_grid(3), p);
  std::stringstream s2;
  write_joint_csv(s2, joint);
  const auto joint_back = read_joint_csv(s2);
  CHECK(joint_back.grid() == joint.grid());
  CHECK(joint_back.mass() == joint.mass());
}

TEST_CASE("cell tables may list rows in any order") {
  std::istringstream in(
      "bin_lo,bin_hi,category,prob\n"
      "1,2,1,0.25\n"
      "0,1,0,0.5\n"
      "\n"
      "1,2,0,1\n"
      "0,1,1,0\n");
  const auto sel = read_selection_csv(in);
  CHECK(sel.grid().bins() == 2);
  CHECK(sel.grid().categories() == 2);
  CHECK(sel(0, 0) == 0.5);
  CHECK(sel(1, 1) == 0.25);
}

TEST_CASE("malformed tables are rejected") {
  auto marginal = [](const std::string& text) {
    return [text] {
      std::istringstream in(text);
      read_marginal_csv(in);
    };
  };
  CHECK(kind_of(marginal("")) == ErrorKind::Parse);
  CHECK(kind_of(marginal("0,1,1\n")) == ErrorKind::Parse);
  CHECK(kind_of(marginal("bin_lo,bin_hi,mass\n")) == ErrorKind::Parse);
  CHECK(kind_of(marginal("bin_lo,bin_hi,mass\n0,1,0.5\n1,2\n")) == ErrorKind::Parse);
  CHECK(kind_of(marginal("bin_lo,bin_hi,mass\n0,1,0.5\n1.5,2,0.5\n")) == ErrorKind::Parse);
  CHECK(kind_of(marginal("bin_lo,bin_hi,mass\n0,1,0.5\n1,2,0.4\n")) == ErrorKind::NotNormalized);
  CHECK(kind_of(marginal("bin_lo,bin_hi,mass\n0,1,x\n")) == ErrorKind::Parse);

  std::istringstream missing("bin_lo,bin_hi,category,prob\n0,1,0,0.5\n0,1,1,0.5\n1,2,0,0.5\n");
  CHECK(kind_of([&] { read_selection_csv(missing); }) == ErrorKind::Parse);
  std::istringstream dup("bin_lo,bin_hi,category,prob\n0,1,0,0.5\n0,1,0,0.5\n");
  CHECK(kind_of([&] { read_selection_csv(dup); }) == ErrorKind::Parse);
}

TEST_CASE("byte order mark and surrounding whitespace are tolerated") {
  std::istringstream in("\xEF\xBB\xBF" "bin_lo, bin_hi ,mass\r\n0 , 1, 0.25\r\n1,2,0.75\r\n");
  const auto m = read_marginal_csv(in);
  CHECK(m[1] == 0.75);
}

TEST_CASE("file helpers") {
  const auto dir = std::filesystem::temp_directory_path() / "popfuse_csv_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  const auto m = Marginal::uniform(Grid::uniform(0.0, 1.0, 3));
  save_marginal(dir / "m.csv", m);
  CHECK(load_marginal(dir / "m.csv").mass() == m.mass());
  CHECK(kind_of([&] { load_marginal(dir / "absent.csv"); }) == ErrorKind::Io);
  std::filesystem::remove_all(dir.parent_path());
}
