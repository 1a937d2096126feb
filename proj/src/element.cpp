#include "cpcstar/element.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

namespace cpcstar {

namespace {

void require_same_shape(const Element& a, const Element& b, const char* op) {
  if (a.shape != b.shape)
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     a.shape.to_string() + " vs " + b.shape.to_string());
}

Matrix hermitian_part(const Matrix& m) { return (m + m.adjoint()) / 2.0; }

}  // namespace

std::string AlgebraShape::to_string() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < blocks.size(); ++i)
    os << (i ? "," : "") << blocks[i];
  os << "]";
  return os.str();
}

AlgebraShape amplified(const AlgebraShape& shape, int r) {
  if (r < 1) throw ShapeError("amplification level must be >= 1");
  std::vector<int> sides;
  sides.reserve(shape.blocks.size());
  for (int k : shape.blocks) sides.push_back(k * r);
  return AlgebraShape(std::move(sides));
}

Element::Element(AlgebraShape s, std::vector<Matrix> b)
    : shape(std::move(s)), blocks(std::move(b)) {
  if (static_cast<int>(blocks.size()) != shape.num_blocks())
    throw ShapeError("Element: expected " + std::to_string(shape.num_blocks()) +
                     " blocks, got " + std::to_string(blocks.size()));
  for (int i = 0; i < shape.num_blocks(); ++i) {
    const int k = shape.blocks[i];
    if (blocks[i].rows() != k || blocks[i].cols() != k)
      throw ShapeError("Element: block " + std::to_string(i) + " is " +
                       std::to_string(blocks[i].rows()) + "x" +
                       std::to_string(blocks[i].cols()) + ", expected " +
                       std::to_string(k) + "x" + std::to_string(k));
  }
}

Element zero_element(const AlgebraShape& shape) {
  std::vector<Matrix> blocks;
  blocks.reserve(shape.blocks.size());
  for (int k : shape.blocks) blocks.push_back(Matrix::Zero(k, k));
  return Element(shape, std::move(blocks));
}

Element unit(const AlgebraShape& shape) {
  std::vector<Matrix> blocks;
  blocks.reserve(shape.blocks.size());
  for (int k : shape.blocks) blocks.push_back(Matrix::Identity(k, k));
  return Element(shape, std::move(blocks));
}

Element matrix_unit(const AlgebraShape& shape, int block, int i, int j) {
  if (block < 0 || block >= shape.num_blocks())
    throw ShapeError("matrix_unit: block index out of range");
  const int k = shape.blocks[block];
  if (i < 0 || i >= k || j < 0 || j >= k)
    throw ShapeError("matrix_unit: entry index out of range");
  Element e = zero_element(shape);
  e.blocks[block](i, j) = 1.0;
  return e;
}

std::vector<Element> matrix_units(const AlgebraShape& shape) {
  std::vector<Element> units;
  units.reserve(shape.dim());
  for (int b = 0; b < shape.num_blocks(); ++b)
    for (int j = 0; j < shape.blocks[b]; ++j)
      for (int i = 0; i < shape.blocks[b]; ++i)
        units.push_back(matrix_unit(shape, b, i, j));
  return units;
}

std::vector<std::string> matrix_unit_labels(const AlgebraShape& shape) {
  std::vector<std::string> labels;
  labels.reserve(shape.dim());
  for (int b = 0; b < shape.num_blocks(); ++b)
    for (int j = 0; j < shape.blocks[b]; ++j)
      for (int i = 0; i < shape.blocks[b]; ++i)
        labels.push_back("b" + std::to_string(b) + "e" + std::to_string(i) +
                         "_" + std::to_string(j));
  return labels;
}

std::vector<Element> hermitian_basis(const AlgebraShape& shape) {
  std::vector<Element> basis;
  for (int b = 0; b < shape.num_blocks(); ++b) {
    const int k = shape.blocks[b];
    for (int i = 0; i < k; ++i) basis.push_back(matrix_unit(shape, b, i, i));
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) {
        Element re = zero_element(shape);
        re.blocks[b](i, j) = 1.0;
        re.blocks[b](j, i) = 1.0;
        basis.push_back(std::move(re));
        Element im = zero_element(shape);
        im.blocks[b](i, j) = Complex(0, 1);
        im.blocks[b](j, i) = Complex(0, -1);
        basis.push_back(std::move(im));
      }
  }
  return basis;
}

std::vector<std::string> hermitian_basis_labels(const AlgebraShape& shape) {
  std::vector<std::string> labels;
  for (int b = 0; b < shape.num_blocks(); ++b) {
    const int k = shape.blocks[b];
    const std::string pre = "b" + std::to_string(b) + "h";
    for (int i = 0; i < k; ++i)
      labels.push_back(pre + std::to_string(i) + "_" + std::to_string(i));
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) {
        labels.push_back(pre + std::to_string(i) + "_" + std::to_string(j) +
                         "re");
        labels.push_back(pre + std::to_string(i) + "_" + std::to_string(j) +
                         "im");
      }
  }
  return labels;
}

Element add(const Element& a, const Element& b) {
  require_same_shape(a, b, "add");
  Element out = a;
  for (int i = 0; i < a.num_blocks(); ++i) out.blocks[i] += b.blocks[i];
  return out;
}

Element subtract(const Element& a, const Element& b) {
  require_same_shape(a, b, "subtract");
  Element out = a;
  for (int i = 0; i < a.num_blocks(); ++i) out.blocks[i] -= b.blocks[i];
  return out;
}

Element scale(Complex c, const Element& a) {
  Element out = a;
  for (auto& blk : out.blocks) blk *= c;
  return out;
}

Element multiply(const Element& a, const Element& b) {
  require_same_shape(a, b, "multiply");
  Element out = a;
  for (int i = 0; i < a.num_blocks(); ++i)
    out.blocks[i] = a.blocks[i] * b.blocks[i];
  return out;
}

Element adjoint(const Element& a) {
  Element out = a;
  for (auto& blk : out.blocks) blk = blk.adjoint().eval();
  return out;
}

double operator_norm(const Element& a) {
  double norm_sq = 0.0;
  for (const auto& blk : a.blocks) {
    if (blk.rows() == 1) {
      norm_sq = std::max(norm_sq, std::norm(blk(0, 0)));
      continue;
    }
    Matrix gram = blk.adjoint() * blk;
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    norm_sq = std::max(norm_sq, std::max(0.0, es.eigenvalues().maxCoeff()));
  }
  return std::sqrt(norm_sq);
}

double frobenius_norm(const Element& a) {
  double sum = 0.0;
  for (const auto& blk : a.blocks) sum += blk.squaredNorm();
  return std::sqrt(sum);
}

double hermiticity_defect(const Element& a) {
  return operator_norm(subtract(a, adjoint(a)));
}

namespace {

double extreme_hermitian_eigenvalue(const Element& a, bool want_min) {
  double extreme = want_min ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
  for (const auto& blk : a.blocks) {
    if (blk.rows() == 1) {
      const double v = blk(0, 0).real();
      extreme = want_min ? std::min(extreme, v) : std::max(extreme, v);
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(blk),
                                             Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    extreme = want_min ? std::min(extreme, ev.minCoeff())
                       : std::max(extreme, ev.maxCoeff());
  }
  return extreme;
}

}  // namespace

double min_eigenvalue(const Element& a) {
  return extreme_hermitian_eigenvalue(a, true);
}

double max_eigenvalue(const Element& a) {
  return extreme_hermitian_eigenvalue(a, false);
}

bool is_positive(const Element& a, const Tolerances& tol) {
  tol.validate();
  if (hermiticity_defect(a) > tol.herm_tol) return false;
  return min_eigenvalue(a) >= -tol.psd_tol;
}

Element positive_sqrt(const Element& a, const Tolerances& tol) {
  if (!is_positive(a, tol))
    throw ValidationError("positive_sqrt: input is not positive within tolerance");
  Element out = a;
  for (auto& blk : out.blocks) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(blk));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    blk = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  }
  return out;
}

Element amplify_element(const Element& a, int r) {
  if (r < 1) throw ShapeError("amplify_element: level must be >= 1");
  if (r == 1) return a;
  std::vector<Matrix> blocks;
  blocks.reserve(a.blocks.size());
  const Matrix id = Matrix::Identity(r, r);
  for (const auto& blk : a.blocks) blocks.push_back(kron(blk, id));
  return Element(amplified(a.shape, r), std::move(blocks));
}

Tolerances default_tolerances(const Element& a) {
  const double scale = (1.0 + operator_norm(a)) * a.shape.max_side();
  Tolerances tol;
  tol.herm_tol = 1e-9 * scale;
  tol.psd_tol = 1e-9 * scale;
  tol.eq_tol = 1e-9;
  return tol;
}

Vector vectorize(const Element& a) {
  Vector v(a.shape.dim());
  int off = 0;
  for (const auto& blk : a.blocks) {
    const int sz = static_cast<int>(blk.size());
    v.segment(off, sz) = Eigen::Map<const Vector>(blk.data(), sz);
    off += sz;
  }
  return v;
}

Element devectorize(const AlgebraShape& shape, const Vector& v) {
  if (v.size() != shape.dim())
    throw ShapeError("devectorize: vector length " + std::to_string(v.size()) +
                     " does not match shape dim " + std::to_string(shape.dim()));
  std::vector<Matrix> blocks;
  blocks.reserve(shape.blocks.size());
  int off = 0;
  for (int k : shape.blocks) {
    blocks.push_back(Eigen::Map<const Matrix>(v.data() + off, k, k));
    off += k * k;
  }
  return Element(shape, std::move(blocks));
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace cpcstar
