#include "cpcstar/cp_map.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

namespace cpcstar {

namespace {

constexpr std::int64_t kActionEntryCap = std::int64_t(1) << 23;

Matrix hermitian_part(const Matrix& m) { return (m + m.adjoint()) / 2.0; }

}  // namespace

CpMap CpMap::identity(const AlgebraShape& shape) {
  std::vector<KrausBlock> kraus;
  kraus.reserve(shape.num_blocks());
  for (int b = 0; b < shape.num_blocks(); ++b) {
    const int k = shape.blocks[b];
    kraus.push_back({b, b, {Matrix::Identity(k, k)}});
  }
  return from_kraus(shape, shape, std::move(kraus));
}

CpMap CpMap::zero(const AlgebraShape& domain, const AlgebraShape& codomain) {
  return from_kraus(domain, codomain, {});
}

CpMap CpMap::from_action(AlgebraShape domain, AlgebraShape codomain,
                         Matrix action) {
  if (action.rows() != codomain.dim() || action.cols() != domain.dim())
    throw ShapeError("CpMap: action is " + std::to_string(action.rows()) + "x" +
                     std::to_string(action.cols()) + ", expected " +
                     std::to_string(codomain.dim()) + "x" +
                     std::to_string(domain.dim()));
  CpMap f;
  f.domain_ = std::move(domain);
  f.codomain_ = std::move(codomain);
  f.action_ = std::move(action);
  return f;
}

CpMap CpMap::from_kraus(AlgebraShape domain, AlgebraShape codomain,
                        std::vector<KrausBlock> kraus) {
  for (const auto& kb : kraus) {
    if (kb.from < 0 || kb.from >= domain.num_blocks() || kb.to < 0 ||
        kb.to >= codomain.num_blocks())
      throw ShapeError("CpMap: Kraus block indices out of range");
    for (const auto& op : kb.ops)
      if (op.rows() != codomain.blocks[kb.to] ||
          op.cols() != domain.blocks[kb.from])
        throw ShapeError("CpMap: Kraus op for (" + std::to_string(kb.from) +
                         "->" + std::to_string(kb.to) + ") is " +
                         std::to_string(op.rows()) + "x" +
                         std::to_string(op.cols()) + ", expected " +
                         std::to_string(codomain.blocks[kb.to]) + "x" +
                         std::to_string(domain.blocks[kb.from]));
  }
  CpMap f;
  f.domain_ = std::move(domain);
  f.codomain_ = std::move(codomain);
  f.kraus_ = std::move(kraus);
  return f;
}

const std::vector<KrausBlock>& CpMap::kraus() const {
  if (!kraus_) throw ShapeError("CpMap: no Kraus representation");
  return *kraus_;
}

Element CpMap::apply(const Element& x) const {
  if (x.shape != domain_)
    throw ShapeError("CpMap::apply: element shape " + x.shape.to_string() +
                     " does not match domain " + domain_.to_string());
  if (kraus_) {
    Element out = zero_element(codomain_);
    for (const auto& kb : *kraus_) {
      const Matrix& blk = x.blocks[kb.from];
      for (const auto& op : kb.ops)
        out.blocks[kb.to].noalias() += op * blk * op.adjoint();
    }
    return out;
  }
  return devectorize(codomain_, *action_ * vectorize(x));
}

Element CpMap::apply_to_matrix_unit(int block, int i, int j) const {
  if (block < 0 || block >= domain_.num_blocks())
    throw ShapeError("apply_to_matrix_unit: block out of range");
  const int k = domain_.blocks[block];
  if (i < 0 || i >= k || j < 0 || j >= k)
    throw ShapeError("apply_to_matrix_unit: entry out of range");
  if (kraus_) {
    // K E_ij K* is the outer product of columns i and j of K.
    Element out = zero_element(codomain_);
    for (const auto& kb : *kraus_) {
      if (kb.from != block) continue;
      for (const auto& op : kb.ops)
        out.blocks[kb.to].noalias() += op.col(i) * op.col(j).adjoint();
    }
    return out;
  }
  const int col = domain_.block_offset(block) + j * k + i;
  return devectorize(codomain_, action_->col(col));
}

const Matrix& CpMap::action_matrix() const {
  if (action_) return *action_;
  if (materialized_) return *materialized_;
  const std::int64_t entries =
      std::int64_t(codomain_.dim()) * std::int64_t(domain_.dim());
  if (entries > kActionEntryCap)
    throw ShapeError(
        "CpMap: dense action with " + std::to_string(entries) +
        " entries exceeds the materialization cap; use the Kraus form");
  Matrix action(codomain_.dim(), domain_.dim());
  int col = 0;
  for (int b = 0; b < domain_.num_blocks(); ++b)
    for (int j = 0; j < domain_.blocks[b]; ++j)
      for (int i = 0; i < domain_.blocks[b]; ++i)
        action.col(col++) = vectorize(apply_to_matrix_unit(b, i, j));
  materialized_ = std::move(action);
  return *materialized_;
}

CpMap compose(const CpMap& f, const CpMap& g) {
  if (g.codomain() != f.domain())
    throw ShapeError("compose: codomain " + g.codomain().to_string() +
                     " of inner map does not match domain " +
                     f.domain().to_string() + " of outer map");
  if (f.has_kraus() && g.has_kraus()) {
    std::map<std::pair<int, int>, std::vector<Matrix>> merged;
    for (const auto& gb : g.kraus())
      for (const auto& fb : f.kraus()) {
        if (fb.from != gb.to) continue;
        auto& ops = merged[{gb.from, fb.to}];
        for (const auto& go : gb.ops)
          for (const auto& fo : fb.ops) ops.push_back(fo * go);
      }
    std::vector<KrausBlock> kraus;
    kraus.reserve(merged.size());
    for (auto& [key, ops] : merged)
      kraus.push_back({key.first, key.second, std::move(ops)});
    return CpMap::from_kraus(g.domain(), f.codomain(), std::move(kraus));
  }
  return CpMap::from_action(g.domain(), f.codomain(),
                            f.action_matrix() * g.action_matrix());
}

Element apply_amplified(const CpMap& f, int r, const Element& x) {
  if (r < 1) throw ShapeError("apply_amplified: level must be >= 1");
  if (r == 1) return f.apply(x);
  const AlgebraShape amp_dom = amplified(f.domain(), r);
  if (x.shape != amp_dom)
    throw ShapeError("apply_amplified: element shape " + x.shape.to_string() +
                     " does not match amplified domain " + amp_dom.to_string());
  Element out = zero_element(amplified(f.codomain(), r));
  // The (s, t) sub-entry of every amplified block is a domain element; its
  // image lands in the (s, t) sub-entries of the amplified codomain.
  for (int s = 0; s < r; ++s)
    for (int t = 0; t < r; ++t) {
      Element sub = zero_element(f.domain());
      for (int b = 0; b < f.domain().num_blocks(); ++b) {
        const int k = f.domain().blocks[b];
        for (int p = 0; p < k; ++p)
          for (int q = 0; q < k; ++q)
            sub.blocks[b](p, q) = x.blocks[b](p * r + s, q * r + t);
      }
      Element img = f.apply(sub);
      for (int b = 0; b < f.codomain().num_blocks(); ++b) {
        const int c = f.codomain().blocks[b];
        for (int u = 0; u < c; ++u)
          for (int v = 0; v < c; ++v)
            out.blocks[b](u * r + s, v * r + t) = img.blocks[b](u, v);
      }
    }
  return out;
}

CpMap amplify_map(const CpMap& f, int r) {
  if (r < 1) throw ShapeError("amplify_map: level must be >= 1");
  if (r == 1) return f;
  const AlgebraShape amp_dom = amplified(f.domain(), r);
  const AlgebraShape amp_cod = amplified(f.codomain(), r);
  if (f.has_kraus()) {
    // K (x) 1_r implements the entrywise action on the amplification factor.
    std::vector<KrausBlock> kraus;
    const Matrix id = Matrix::Identity(r, r);
    for (const auto& kb : f.kraus()) {
      KrausBlock amp{kb.from, kb.to, {}};
      amp.ops.reserve(kb.ops.size());
      for (const auto& op : kb.ops) amp.ops.push_back(kron(op, id));
      kraus.push_back(std::move(amp));
    }
    return CpMap::from_kraus(amp_dom, amp_cod, std::move(kraus));
  }
  const std::int64_t entries =
      std::int64_t(amp_cod.dim()) * std::int64_t(amp_dom.dim());
  if (entries > kActionEntryCap)
    throw ShapeError("amplify_map: amplified action too large; use apply_amplified");
  Matrix action = Matrix::Zero(amp_cod.dim(), amp_dom.dim());
  for (int b = 0; b < f.domain().num_blocks(); ++b) {
    const int k = f.domain().blocks[b];
    const int amp_off = amp_dom.block_offset(b);
    for (int q = 0; q < k; ++q)
      for (int p = 0; p < k; ++p) {
        const Element img = f.apply_to_matrix_unit(b, p, q);
        for (int s = 0; s < r; ++s)
          for (int t = 0; t < r; ++t) {
            // image of E_pq (x) E_st, column-stacked in the amplified domain
            const int col = amp_off + (q * r + t) * (k * r) + (p * r + s);
            for (int cb = 0; cb < f.codomain().num_blocks(); ++cb) {
              const int c = f.codomain().blocks[cb];
              const int row_off = amp_cod.block_offset(cb);
              for (int v = 0; v < c; ++v)
                for (int u = 0; u < c; ++u)
                  action(row_off + (v * r + t) * (c * r) + (u * r + s), col) =
                      img.blocks[cb](u, v);
            }
          }
      }
  }
  return CpMap::from_action(amp_dom, amp_cod, std::move(action));
}

std::vector<ChoiBlock> choi(const CpMap& f, int max_side) {
  std::vector<ChoiBlock> out;
  for (int i = 0; i < f.domain().num_blocks(); ++i) {
    const int k = f.domain().blocks[i];
    for (int j = 0; j < f.codomain().num_blocks(); ++j) {
      const int c = f.codomain().blocks[j];
      const int side = k * c;
      if (side > max_side)
        throw ShapeError("choi: pair (" + std::to_string(i) + "," +
                         std::to_string(j) + ") has side " +
                         std::to_string(side) + " > cap " +
                         std::to_string(max_side));
      ChoiBlock cb;
      cb.domain_block = i;
      cb.codomain_block = j;
      cb.matrix = Matrix::Zero(side, side);
      if (f.has_kraus()) {
        // Gram form: each op contributes the outer product of its
        // column-major flattening with index (domain entry outer).
        for (const auto& kb : f.kraus()) {
          if (kb.from != i || kb.to != j) continue;
          for (const auto& op : kb.ops) {
            Vector w(side);
            for (int p = 0; p < k; ++p)
              for (int u = 0; u < c; ++u) w(p * c + u) = op(u, p);
            cb.matrix.noalias() += w * w.adjoint();
          }
        }
      } else {
        for (int p = 0; p < k; ++p)
          for (int q = 0; q < k; ++q) {
            const Element img = f.apply_to_matrix_unit(i, p, q);
            cb.matrix.block(p * c, q * c, c, c) = img.blocks[j];
          }
      }
      Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(cb.matrix),
                                               Eigen::EigenvaluesOnly);
      cb.min_eigenvalue = es.eigenvalues().minCoeff();
      out.push_back(std::move(cb));
    }
  }
  return out;
}

bool is_completely_positive(const CpMap& f, const Tolerances& tol) {
  tol.validate();
  bool cp = true;
  for (const auto& cb : choi(f))
    if (cb.min_eigenvalue < -tol.psd_tol) cp = false;
  f.verdicts().is_cp = cp;
  return cp;
}

bool is_contractive_cp(const CpMap& f, const Tolerances& tol) {
  // Kraus maps are completely positive by construction; dense maps go
  // through the Choi check.
  if (!f.has_kraus() && !is_completely_positive(f, tol))
    throw ValidationError(
        "is_contractive_cp: map fails the complete positivity check");
  const bool contractive =
      operator_norm(f.apply(unit(f.domain()))) <= 1.0 + tol.eq_tol;
  f.verdicts().is_contractive = contractive;
  return contractive;
}

namespace {

struct UnitIndex {
  int block, i, j;
};

std::vector<UnitIndex> unit_indices(const AlgebraShape& shape) {
  std::vector<UnitIndex> idx;
  idx.reserve(shape.dim());
  for (int b = 0; b < shape.num_blocks(); ++b)
    for (int j = 0; j < shape.blocks[b]; ++j)
      for (int i = 0; i < shape.blocks[b]; ++i) idx.push_back({b, i, j});
  return idx;
}

}  // namespace

double order_zero_defect(const CpMap& f, const ProbePolicy& policy) {
  const Element funit = f.apply(unit(f.domain()));
  double defect = 0.0;
  if (policy.include_matrix_units) {
    const auto idx = unit_indices(f.domain());
    std::vector<Element> images;
    images.reserve(idx.size());
    for (const auto& u : idx)
      images.push_back(f.apply_to_matrix_unit(u.block, u.i, u.j));
    for (size_t a = 0; a < idx.size(); ++a)
      for (size_t b = 0; b < idx.size(); ++b) {
        Element lhs = multiply(images[a], images[b]);
        // E_{i1 j1} E_{i2 j2} is E_{i1 j2} when the blocks agree and
        // j1 == i2, zero otherwise.
        if (idx[a].block == idx[b].block && idx[a].j == idx[b].i) {
          const Element fab =
              f.apply_to_matrix_unit(idx[a].block, idx[a].i, idx[b].j);
          lhs = subtract(lhs, multiply(funit, fab));
        }
        defect = std::max(defect, operator_norm(lhs));
      }
  }
  if (policy.random_pairs > 0) {
    Rng rng(policy.seed);
    for (int t = 0; t < policy.random_pairs; ++t) {
      const Element a = rng.random_contraction(f.domain());
      const Element b = rng.random_contraction(f.domain());
      const Element lhs = subtract(multiply(f.apply(a), f.apply(b)),
                                   multiply(funit, f.apply(multiply(a, b))));
      defect = std::max(defect, operator_norm(lhs));
    }
  }
  f.verdicts().order_zero_defect = defect;
  return defect;
}

double map_norm_estimate(const CpMap& f, int samples, Rng& rng) {
  double best = operator_norm(f.apply(unit(f.domain())));
  const auto idx = unit_indices(f.domain());
  for (const auto& u : idx)
    best = std::max(best,
                    operator_norm(f.apply_to_matrix_unit(u.block, u.i, u.j)));
  for (int t = 0; t < samples; ++t) {
    best = std::max(best,
                    operator_norm(f.apply(rng.random_unitary(f.domain()))));
    best = std::max(best,
                    operator_norm(f.apply(rng.random_contraction(f.domain()))));
  }
  return best;
}

double map_norm_estimate(const CpMap& f, int samples, std::uint64_t seed) {
  Rng rng(seed);
  return map_norm_estimate(f, samples, rng);
}

double map_difference_norm_estimate(const CpMap& f, const CpMap& g,
                                    int samples, Rng& rng) {
  if (f.domain() != g.domain() || f.codomain() != g.codomain())
    throw ShapeError("map_difference_norm_estimate: shape mismatch");
  auto probe = [&](const Element& x) {
    return operator_norm(subtract(f.apply(x), g.apply(x)));
  };
  double best = probe(unit(f.domain()));
  for (const auto& u : unit_indices(f.domain()))
    best = std::max(best, operator_norm(subtract(
                              f.apply_to_matrix_unit(u.block, u.i, u.j),
                              g.apply_to_matrix_unit(u.block, u.i, u.j))));
  for (int t = 0; t < samples; ++t) {
    best = std::max(best, probe(rng.random_unitary(f.domain())));
    best = std::max(best, probe(rng.random_contraction(f.domain())));
  }
  return best;
}

OrderZeroDecomposition structure_decomposition(const CpMap& f,
                                               const Tolerances& tol,
                                               double oz_threshold,
                                               const ProbePolicy& policy) {
  tol.validate();
  const double oz = order_zero_defect(f, policy);
  if (oz > oz_threshold)
    throw ValidationError("structure_decomposition: order-zero defect " +
                          std::to_string(oz) + " exceeds threshold " +
                          std::to_string(oz_threshold));
  OrderZeroDecomposition dec;
  dec.h = f.apply(unit(f.domain()));
  if (!is_positive(dec.h, default_tolerances(dec.h)))
    throw ValidationError("structure_decomposition: f(1) is not positive");
  const double hnorm = operator_norm(dec.h);
  const double cutoff = tol.psd_tol * hnorm;

  dec.support_projection = zero_element(dec.h.shape);
  Element h_half = zero_element(dec.h.shape);
  Element h_pinv_half = zero_element(dec.h.shape);
  for (int b = 0; b < dec.h.num_blocks(); ++b) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(
        hermitian_part(dec.h.blocks[b]));
    const auto& ev = es.eigenvalues();
    const Matrix& v = es.eigenvectors();
    Eigen::VectorXd proj(ev.size()), sqrt_ev(ev.size()), pinv(ev.size());
    for (int i = 0; i < ev.size(); ++i) {
      const bool in_support = ev(i) > cutoff;
      proj(i) = in_support ? 1.0 : 0.0;
      sqrt_ev(i) = std::sqrt(std::max(0.0, ev(i)));
      pinv(i) = in_support ? 1.0 / sqrt_ev(i) : 0.0;
    }
    dec.support_projection.blocks[b] = v * proj.asDiagonal() * v.adjoint();
    h_half.blocks[b] = v * sqrt_ev.asDiagonal() * v.adjoint();
    h_pinv_half.blocks[b] = v * pinv.asDiagonal() * v.adjoint();
  }

  auto pi_apply = [&](const Element& x) {
    Element inner = multiply(h_pinv_half, multiply(f.apply(x), h_pinv_half));
    return multiply(dec.support_projection,
                    multiply(inner, dec.support_projection));
  };

  Matrix pi_action(f.codomain().dim(), f.domain().dim());
  int col = 0;
  for (int b = 0; b < f.domain().num_blocks(); ++b)
    for (int j = 0; j < f.domain().blocks[b]; ++j)
      for (int i = 0; i < f.domain().blocks[b]; ++i)
        pi_action.col(col++) =
            vectorize(pi_apply(matrix_unit(f.domain(), b, i, j)));
  dec.pi_action =
      CpMap::from_action(f.domain(), f.codomain(), std::move(pi_action));

  auto probe_residual = [&](const Element& a) {
    const Element fa = f.apply(a);
    const Element rebuilt = multiply(h_half, multiply(pi_apply(a), h_half));
    dec.residual = std::max(dec.residual, operator_norm(subtract(fa, rebuilt)));
    dec.commutation_defect =
        std::max(dec.commutation_defect,
                 operator_norm(subtract(multiply(dec.h, fa),
                                        multiply(fa, dec.h))));
  };
  for (const auto& u : matrix_units(f.domain())) probe_residual(u);
  if (policy.random_pairs > 0) {
    Rng rng(policy.seed);
    for (int t = 0; t < policy.random_pairs; ++t)
      probe_residual(rng.random_contraction(f.domain()));
  }
  return dec;
}

EmbeddingProbeReport complete_order_embedding_probe(
    const CpMap& f, const std::vector<int>& levels, const Tolerances& tol,
    int samples, std::uint64_t seed) {
  tol.validate();
  EmbeddingProbeReport report;
  for (int r : levels) {
    if (r < 1) throw ShapeError("complete_order_embedding_probe: level must be >= 1");
    EmbeddingLevelReport row;
    row.level = r;
    const AlgebraShape amp_dom = amplified(f.domain(), r);
    Rng rng(seed + static_cast<std::uint64_t>(r));

    std::vector<Element> probes = hermitian_basis(amp_dom);
    for (int t = 0; t < samples; ++t) {
      Element h = rng.random_hermitian(amp_dom);
      const double norm = operator_norm(h);
      if (norm > 0) h = scale(1.0 / norm, h);
      probes.push_back(std::move(h));
      probes.push_back(rng.random_contraction(amp_dom));
    }
    for (const auto& x : probes) {
      const Element image = apply_amplified(f, r, x);
      row.isometry_defect =
          std::max(row.isometry_defect,
                   std::abs(operator_norm(image) - operator_norm(x)));
      if (is_positive(image, tol) && !is_positive(x, tol))
        row.order_reflection_failure =
            std::max(row.order_reflection_failure, -min_eigenvalue(x));
    }
    row.probes = static_cast<int>(probes.size());
    report.levels.push_back(row);
  }
  return report;
}

}  // namespace cpcstar
