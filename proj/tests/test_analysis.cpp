#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "liflab/analysis.hpp"
#include "liflab/errors.hpp"
#include "liflab/grid.hpp"

using namespace liflab;

TEST_CASE("decay constants reproduce their closed forms") {
  const ContractionConstants k = contraction_constants({0.2, 0.1, 1.0, 0.0});
  CHECK(k.t0 == doctest::Approx(2.995732273553991).epsilon(1e-14));    // log(4/h)
  CHECK(k.c == doctest::Approx(0.025).epsilon(1e-14));                 // (s0/2)(h/4)^s0
  CHECK(k.a == doctest::Approx(0.008451291928785767).epsilon(1e-12));  // -log(1-c)/t0
  CHECK(k.prefactor == doctest::Approx(1.0256410256410258).epsilon(1e-14));
  CHECK(k.omega == doctest::Approx(-k.a).epsilon(1e-12));  // J = 0 collapses to the linear rate

  const ContractionConstants kw = contraction_constants({0.2, 0.1, 1.0, 2e-4});
  CHECK(kw.omega == doctest::Approx(-0.008040871366721353).epsilon(1e-9));
  CHECK(kw.omega < 0.0);  // still contracting at this coupling

  // at J >= 1 the rate bound is meaningless and must come back NaN, not throw
  const ContractionConstants ks = contraction_constants({0.2, 0.1, 1.0, 1.0});
  CHECK(std::isnan(ks.omega));
  CHECK(ks.a == doctest::Approx(0.008451291928785767).epsilon(1e-12));
}

// Pinned against an independent 120-digit evaluation of the closed forms.
namespace {
struct ConstRow { double h, v_r, sigma0, J, t0, c, a, omega, pref; };
constexpr double kQuietNan = std::numeric_limits<double>::quiet_NaN();
constexpr ConstRow kConstTable[] = {
    {0.2, 0.1, 1.0, 0.0, 2.995732273553991, 0.025, 0.0084512919287857656, -0.0084512919287857656, 1.0256410256410256},
    {0.2, 0.1, 1.0, 0.0002, 2.995732273553991, 0.025, 0.0084512919287857656, -0.0080408713667213521, 1.0256410256410256},
    {0.2, 0.1, 1.0, 0.5, 2.995732273553991, 0.025, 0.0084512919287857656, 4.0941128106353168, 1.0256410256410256},
    {0.2, 0.1, 0.02, 7.0, 2.995732273553991, 0.0094184492088302773, 0.0031588548022155485, kQuietNan, 1.0095079998222336},
    {0.2, 0.1, 6.0, 6.0, 2.995732273553991, 4.6875e-8, 1.5647259774326438e-8, kQuietNan, 1.0000000468750022},
    {0.2, 0.1, 2.0, 0.1, 2.995732273553991, 0.0025, 0.00083556539421626569, 0.4942292571559864, 1.0025062656641604},
    {0.05, 0.3, 50.0, 0.0, 4.3820266346738816, 1.7516230804060213e-94, 3.9972898990295168e-95, -3.9972898990295168e-95, 1.0},
    {0.05, 0.3, 0.5, 0.2, 4.3820266346738816, 0.027950849718747371, 0.0064693604194068537, 0.31501644089998247, 1.0287545642220458},
    {0.05, 0.3, 2.0, 0.001, 4.3820266346738816, 0.00015625, 3.5659803403863633e-5, 0.0039729785623608111, 1.0001562744178778},
    {0.1, 0.1, 20.0, 1.0, 3.6888794541139363, 9.0949470177292824e-32, 2.4655039913506406e-32, kQuietNan, 1.0},
    {0.1, 0.1, 20.0, 9.0, 3.6888794541139363, 9.0949470177292824e-32, 2.4655039913506406e-32, kQuietNan, 1.0},
    {0.1, 0.45, 3.0, 0.25, 3.6888794541139363, 2.34375e-5, 6.3536298634958934e-6, 2.6667228145016813, 1.0000234380493293},
    {0.3, 0.25, 1.0, 0.0, 2.5902671654458266, 0.0375, 0.014755702936773813, -0.014755702936773813, 1.038961038961039},
    {0.3, 0.25, 10.0, 1e-05, 2.5902671654458266, 2.8156757354736328e-11, 1.0870213594467773e-11, 0.00020000398919541867, 1.0000000000281568},
    {0.4, 0.15, 0.75, 0.3, 2.3025850929940457, 0.066685477876459605, 0.029971976613451166, 0.95401287004814791, 1.0714501663648523},
    {0.25, 0.6, 5.0, 0.9, 2.7725887222397812, 2.384185791015625e-6, 8.5991427941215374e-7, 900.00214491241355, 1.0000023841914754},
    {0.15, 0.5, 30.0, 0.0, 3.2834143460057719, 2.4947629799602748e-42, 7.5980754088959849e-43, -7.5980754088959849e-43, 1.0},
    {0.45, 0.2, 1.5, 1e-06, 2.1848020573376622, 0.028300235340231713, 0.013140049110942166, -0.013136961731373788, 1.0291244645408973},
    {0.2, 0.7, 0.1, 0.05, 2.995732273553991, 0.037056722455347386, 0.01260485493811671, -0.0010981206700035046, 1.0384827676972168},
    {0.35, 0.33, 4.0, 0.6, 2.4361164856185683, 0.000117236328125, 4.8127091431223614e-5, 30.003469375131364, 1.0001172500740932},
};
}  // namespace

TEST_CASE("decay constants match a high-precision oracle across the parameter space") {
  for (const ConstRow& row : kConstTable) {
    CAPTURE(row.h);
    CAPTURE(row.sigma0);
    CAPTURE(row.J);
    const ContractionConstants k = contraction_constants({row.h, row.v_r, row.sigma0, row.J});
    CHECK(k.t0 == doctest::Approx(row.t0).epsilon(1e-14));
    CHECK(k.c == doctest::Approx(row.c).epsilon(1e-12));
    CHECK(k.a == doctest::Approx(row.a).epsilon(1e-12));
    CHECK(k.prefactor == doctest::Approx(row.pref).epsilon(1e-12));
    if (std::isnan(row.omega)) {
      CHECK(std::isnan(k.omega));
    } else {
      CHECK(k.omega == doctest::Approx(row.omega).epsilon(1e-12));
    }
  }
}

TEST_CASE("rate fitting recovers an exact exponential") {
  std::vector<double> t, tv;
  for (int i = 0; i <= 40; ++i) {
    t.push_back(0.5 * i);
    tv.push_back(3.0 * std::exp(-0.7 * 0.5 * i));
  }
  CHECK(fit_rate(t, tv, 2.0, 18.0) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("rate fitting tolerates additive noise") {
  std::vector<double> t, tv;
  for (int i = 0; i <= 9; ++i) {
    t.push_back(0.5 * i);
    tv.push_back(std::exp(-0.5 * 0.5 * i) + (i % 2 ? 1e-3 : -1e-3));
  }
  CHECK(std::fabs(fit_rate(t, tv, 0.0, 4.5) - 0.5) <= 0.05);
}

TEST_CASE("rate fitting skips floored values and rejects starved windows") {
  std::vector<double> t, tv;
  for (int i = 0; i < 6; ++i) {
    t.push_back(i);
    tv.push_back(std::exp(-0.3 * i));
  }
  for (int i = 6; i < 10; ++i) {
    t.push_back(i);
    tv.push_back(1e-13);  // below the usable floor
  }
  CHECK(fit_rate(t, tv, 0.0, 10.0) == doctest::Approx(0.3).epsilon(1e-12));
  // only the floored points fall in this window
  CHECK_THROWS_AS(fit_rate(t, tv, 6.0, 10.0), ValidationError);
  CHECK_THROWS_AS(fit_rate({0, 1}, {1.0, 0.5}, 0.0, 1.0), ValidationError);
}

TEST_CASE("uncoupled flow from opposite extremes contracts inside the envelope") {
  const ModelParams p{0.2, 0.1, 1.0, 0.0};
  const GridLayout L = make_layout(200, p.h, p.v_r);
  const GridDensity da = from_atoms(L, {{0.0, 1.0}});
  const GridDensity db = from_atoms(L, {{0.999, 1.0}});
  const DecayReport rep = verify_linear_contraction(da, db, p, 20.0, 40);
  CHECK(rep.mode == "linear");
  CHECK(rep.tv0 == 2.0);  // disjoint unit atoms
  CHECK(rep.claim);
  CHECK(rep.envelope_holds);
  CHECK(rep.nonincreasing);
  CHECK(rep.worst_violation <= 0.0);
  CHECK(rep.points.size() == 41);
  CHECK(rep.theory_rate == doctest::Approx(0.008451291928785767).epsilon(1e-12));
  // the guaranteed rate is loose: the measured decay must beat it comfortably
  CHECK(rep.fitted_rate > rep.theory_rate);
}

TEST_CASE("an unstable step is caught with either guard setting") {
  const ModelParams p{0.2, 0.1, 1.0, 0.0};
  const GridLayout L = make_layout(200, p.h, p.v_r);
  const GridDensity da = from_atoms(L, {{0.0, 1.0}});
  const GridDensity db = from_atoms(L, {{0.999, 1.0}});
  // guard on: refused before any step is taken
  CHECK_THROWS_AS(verify_linear_contraction(da, db, p, 20.0, 40, 0.02, true), NumericError);
  // guard off: the blown-up TV series violates the envelope and trips the check
  CHECK_THROWS_AS(verify_linear_contraction(da, db, p, 20.0, 40, 0.02, false), NumericError);
}

TEST_CASE("weak coupling converges to the self-consistent profile inside the envelope") {
  const ModelParams p{0.2, 0.1, 1.0, 2e-4};
  const GridLayout L = make_layout(200, p.h, p.v_r);
  const GridDensity u0 = from_function(L, [](double) { return 1.0; });
  const DecayReport rep = verify_nonlinear_stability(u0, p, 20.0, 40);
  CHECK(rep.mode == "nonlinear");
  CHECK(rep.claim);
  CHECK(rep.envelope_holds);
  CHECK(rep.worst_violation <= 0.0);
  CHECK(rep.tv0 > 0.5);
  CHECK(rep.constants.omega == doctest::Approx(-0.008040871366721353).epsilon(1e-9));
  CHECK(rep.theory_rate == doctest::Approx(-rep.constants.omega).epsilon(1e-12));
}

TEST_CASE("strong coupling runs as an observation-only experiment") {
  const ModelParams p{0.2, 0.1, 1.0, 1.5};
  const GridLayout L = make_layout(200, p.h, p.v_r);
  const GridDensity u0 = from_function(L, [](double) { return 1.0; });
  const DecayReport rep = verify_nonlinear_stability(u0, p, 5.0, 10);
  CHECK_FALSE(rep.claim);
  CHECK(std::isnan(rep.constants.omega));
  CHECK(std::isnan(rep.points.front().envelope));
  CHECK(!rep.note.empty());
  CHECK(rep.envelope_holds);  // vacuously: nothing was asserted
}
