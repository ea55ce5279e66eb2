#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "affsls/solver.hpp"

namespace affsls {
namespace {

using Eigen::Index;
using Eigen::VectorXd;

void write_triplets(std::ostream& os, const SparseMatrix& M) {
  for (Index r = 0; r < M.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(M, r); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

void write_vector(std::ostream& os, const VectorXd& v) {
  for (Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << v(i);
  os << '\n';
}

void expect(std::istream& is, const std::string& word) {
  std::string got;
  if (!(is >> got) || got != word) {
    throw std::runtime_error("read_program: expected '" + word + "', got '" +
                             got + "'");
  }
}

template <typename T>
T read_value(std::istream& is, const char* what) {
  T v{};
  if (!(is >> v)) {
    throw std::runtime_error(std::string("read_program: malformed ") + what);
  }
  return v;
}

SparseMatrix read_triplets(std::istream& is, Index rows, Index cols, Index nnz) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(nnz));
  for (Index k = 0; k < nnz; ++k) {
    const auto i = read_value<Index>(is, "triplet row");
    const auto j = read_value<Index>(is, "triplet column");
    const auto v = read_value<double>(is, "triplet value");
    if (i < 0 || i >= rows || j < 0 || j >= cols) {
      throw std::runtime_error("read_program: triplet index out of range");
    }
    trips.emplace_back(i, j, v);
  }
  SparseMatrix M(rows, cols);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

VectorXd read_vector(std::istream& is, Index size) {
  VectorXd v(size);
  for (Index i = 0; i < size; ++i) v(i) = read_value<double>(is, "vector entry");
  return v;
}

}  // namespace

void write_program(std::ostream& os, const ConvexProgram& prog) {
  prog.validate();
  const auto old_precision = os.precision();
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "affsls-qp 1\n";
  os << "vars " << prog.num_vars << '\n';
  os << "objective_constant " << prog.objective_constant << '\n';
  os << "P " << prog.P.nonZeros() << '\n';
  write_triplets(os, prog.P);
  os << "q\n";
  write_vector(os, prog.q);
  os << "A " << prog.A_eq.rows() << ' ' << prog.A_eq.nonZeros() << '\n';
  write_triplets(os, prog.A_eq);
  os << "b\n";
  write_vector(os, prog.b_eq);
  os << "C " << prog.C_ineq.rows() << ' ' << prog.C_ineq.nonZeros() << '\n';
  write_triplets(os, prog.C_ineq);
  os << "d\n";
  write_vector(os, prog.d_ineq);
  const bool bounds = prog.lower_bounds || prog.upper_bounds;
  os << "bounds " << (bounds ? 1 : 0) << '\n';
  if (bounds) {
    const double inf = std::numeric_limits<double>::infinity();
    os << "lb\n";
    write_vector(os, prog.lower_bounds.value_or(VectorXd::Constant(prog.num_vars, -inf)));
    os << "ub\n";
    write_vector(os, prog.upper_bounds.value_or(VectorXd::Constant(prog.num_vars, inf)));
  }
  os.precision(old_precision);
}

ConvexProgram read_program(std::istream& is) {
  expect(is, "affsls-qp");
  if (read_value<int>(is, "version") != 1) {
    throw std::runtime_error("read_program: unsupported version");
  }
  expect(is, "vars");
  const auto n = read_value<Index>(is, "variable count");
  if (n < 0) throw std::runtime_error("read_program: negative variable count");
  ConvexProgram prog = ConvexProgram::Empty(n);
  expect(is, "objective_constant");
  prog.objective_constant = read_value<double>(is, "objective constant");
  expect(is, "P");
  prog.P = read_triplets(is, n, n, read_value<Index>(is, "P nnz"));
  expect(is, "q");
  prog.q = read_vector(is, n);
  expect(is, "A");
  const auto ne = read_value<Index>(is, "A rows");
  prog.A_eq = read_triplets(is, ne, n, read_value<Index>(is, "A nnz"));
  expect(is, "b");
  prog.b_eq = read_vector(is, ne);
  expect(is, "C");
  const auto ni = read_value<Index>(is, "C rows");
  prog.C_ineq = read_triplets(is, ni, n, read_value<Index>(is, "C nnz"));
  expect(is, "d");
  prog.d_ineq = read_vector(is, ni);
  expect(is, "bounds");
  if (read_value<int>(is, "bounds flag") == 1) {
    // operator>> does not parse "inf"; read tokens by hand.
    auto read_bounds = [&](const char* tag) {
      expect(is, tag);
      VectorXd v(n);
      for (Index i = 0; i < n; ++i) {
        const auto tok = read_value<std::string>(is, "bound");
        if (tok == "inf") v(i) = std::numeric_limits<double>::infinity();
        else if (tok == "-inf") v(i) = -std::numeric_limits<double>::infinity();
        else v(i) = std::stod(tok);
      }
      return v;
    };
    prog.lower_bounds = read_bounds("lb");
    prog.upper_bounds = read_bounds("ub");
  }
  prog.validate();
  return prog;
}

}  // namespace affsls
