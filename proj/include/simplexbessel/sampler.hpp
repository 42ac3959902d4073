#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "simplexbessel/model.hpp"
#include "simplexbessel/rng.hpp"
#include "simplexbessel/symmetry.hpp"

namespace simplexbessel {

/// Immutable set of configurations together with the parameters and the
/// stream state they were drawn from.
struct SampleBatch {
  std::vector<SimplexPoint> points;
  ModelParams params;
  RngStream seed_record;
};

/// Exact draws from q_N: the gap vector is symmetric
/// Dirichlet(beta', ..., beta') with N+1 components.
SampleBatch sample_invariant(const ModelParams& p, RngStream& rng,
                             std::size_t count);

/// One exact draw from q_N written into `out` (size N).
void draw_invariant(const ModelParams& p, RngStream& rng, std::span<double> out);

/// Sorted iid uniforms, i.e. density N! on the simplex. `params` of the
/// returned batch is (n, n+1), the model whose invariant law is uniform.
SampleBatch sample_uniform_simplex(int n, RngStream& rng, std::size_t count);

/// Ambient points whose folded gaps g_1..g_n contain exactly d_target zeros
/// at uniformly chosen positions. The positive gaps are at least
/// kProbeSeparation apart and the folded maximum stays below kProbeCeiling.
/// Signs and coordinate order are randomized.
inline constexpr double kProbeSeparation = 0.05;
inline constexpr double kProbeCeiling = 0.8;
std::vector<AmbientPoint> probe_points(int n, int d_target, std::size_t count,
                                       RngStream& rng);

/// CSV with header x1,...,xN and 17 significant digits per value.
void write_csv(std::ostream& os, const SampleBatch& batch);

}  // namespace simplexbessel
