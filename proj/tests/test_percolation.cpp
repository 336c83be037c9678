#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "pinning/errors.hpp"
#include "pinning/percolation.hpp"
#include "pinning/rng.hpp"

using namespace pinning;
using namespace pinning::percolation;
namespace ob = pinning::obstacles;

namespace {

// Depth-first enumeration of every admissible level map; returns the pointwise minimum
// over all of them, or nullopt if none exists.
std::optional<std::vector<long>> exhaustive_minimum(const Window& w, long J, const std::vector<std::uint8_t>& open,
                                                    double alpha) {
    const std::size_t m = w.size();
    std::vector<long> y(m, 0);
    std::vector<long> best(m, J + 1);
    bool found = false;
    auto rec = [&](auto&& self, std::size_t a) -> void {
        if (a == m) {
            found = true;
            for (std::size_t i = 0; i < m; ++i) best[i] = std::min(best[i], y[i]);
            return;
        }
        for (long j = 1; j <= J; ++j) {
            if (!open[a * J + (j - 1)]) continue;
            bool ok = true;
            for (std::size_t b = 0; b < a && ok; ++b)
                ok = std::abs(j - y[b]) <= lipschitz_H(w.distance(a, b), alpha);
            if (!ok) continue;
            y[a] = j;
            self(self, a + 1);
        }
    };
    rec(rec, 0);
    if (!found) return std::nullopt;
    return best;
}

bool admissible(const Window& w, long J, const std::vector<std::uint8_t>& open, const std::vector<long>& y,
                double alpha) {
    for (std::size_t a = 0; a < y.size(); ++a) {
        if (y[a] < 1 || y[a] > J || !open[a * J + (y[a] - 1)]) return false;
        for (std::size_t b = 0; b < y.size(); ++b)
            if (std::abs(y[a] - y[b]) > lipschitz_H(w.distance(a, b), alpha)) return false;
    }
    return true;
}

Window line_window(long lo, long count) {
    Window w;
    w.n = 1;
    w.lo = {lo, 0, 0};
    w.extent = {count, 1, 1};
    return w;
}

}  // namespace

TEST_CASE("H function") {
    CHECK(lipschitz_H(0, 0.5) == 0);
    CHECK(lipschitz_H(1, 0.5) == 1);
    CHECK(lipschitz_H(3, 0.5) == 1);
    CHECK(lipschitz_H(4, 0.5) == 2);
    CHECK(lipschitz_H(9, 0.5) == 3);
    CHECK(lipschitz_H(8, 1.0 / 3.0) == 2);
}

TEST_CASE("open probability") {
    CHECK(open_probability(3.0, 1.0, 5.0, 1.0, 2, 0.0) == 0.0);
    // lambda h (l - 2 r1)^n mu = ln 2
    CHECK(open_probability(std::log(2.0), 1.0, 3.0, 1.0, 1, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("all open gives the flat surface") {
    const Window w = Window::centred(2, 3);
    const long J = 5;
    std::vector<std::uint8_t> open(w.size() * J, 1);
    const auto y = smallest_levels(w, J, open, 0.5);
    for (long v : y) CHECK(v == 1);
}

TEST_CASE("closed column in a line") {
    const Window w = line_window(-5, 11);
    const long J = 6;
    std::vector<std::uint8_t> open(w.size() * J, 1);
    const std::size_t c0 = w.flat({0, 0, 0});
    for (long j = 1; j <= 3; ++j) open[c0 * J + (j - 1)] = 0;
    const auto y = smallest_levels(w, J, open, 0.5);
    CHECK(y[c0] == 4);
    const auto oracle = exhaustive_minimum(w, J, open, 0.5);
    REQUIRE(oracle.has_value());
    CHECK(*oracle == y);
    CHECK(admissible(w, J, open, y, 0.5));
}

TEST_CASE("fixed-point iteration equals exhaustive search on random windows") {
    auto rng = make_rng(42, Stage::Tests);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int compared = 0;
    int no_surface = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Window w;
        if (trial % 2 == 0) {
            w = line_window(0, 6 + trial % 7);  // 6..12 columns
        } else {
            w.n = 2;
            w.lo = {0, 0, 0};
            w.extent = {3, 2 + (trial / 2) % 3, 1};  // 6, 9 or 12 columns
        }
        const long J = 3 + trial % 4;  // 3..6 levels
        const double p = 0.45 + 0.5 * u(rng);
        const double alpha = trial % 3 == 0 ? 1.0 : 0.5;
        std::vector<std::uint8_t> open(w.size() * J);
        for (auto& o : open) o = u(rng) < p ? 1 : 0;
        const auto oracle = exhaustive_minimum(w, J, open, alpha);
        if (!oracle) {
            CHECK_THROWS_AS(smallest_levels(w, J, open, alpha), NoSurfaceError);
            ++no_surface;
            continue;
        }
        const auto y = smallest_levels(w, J, open, alpha);
        CHECK(y == *oracle);
        CHECK(admissible(w, J, open, y, alpha));
        ++compared;
    }
    CHECK(compared >= 60);
    MESSAGE("compared " << compared << " windows, " << no_surface << " without a surface");
}

TEST_CASE("monotonicity and translation equivariance") {
    auto rng = make_rng(43, Stage::Tests);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Window w = Window::torus(2, 6);
    const long J = 8;
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::uint8_t> open(w.size() * J);
        for (auto& o : open) o = u(rng) < 0.7 ? 1 : 0;
        for (std::size_t a = 0; a < w.size(); ++a) open[a * J + (J - 1)] = 1;
        const auto y1 = smallest_levels(w, J, open, 0.5);
        auto more = open;
        for (auto& o : more) o = o || u(rng) < 0.2;
        const auto y2 = smallest_levels(w, J, more, 0.5);
        for (std::size_t a = 0; a < y1.size(); ++a) CHECK(y2[a] <= y1[a]);

        // Shift by t = (2, 1) on the torus.
        std::vector<std::uint8_t> shifted(open.size());
        for (std::size_t a = 0; a < w.size(); ++a) {
            auto idx = w.index(a);
            idx[0] += 2;
            idx[1] += 1;
            const std::size_t b = w.flat(idx);
            for (long j = 0; j < J; ++j) shifted[b * J + j] = open[a * J + j];
        }
        const auto ys = smallest_levels(w, J, shifted, 0.5);
        for (std::size_t a = 0; a < w.size(); ++a) {
            auto idx = w.index(a);
            idx[0] += 2;
            idx[1] += 1;
            CHECK(ys[w.flat(idx)] == y1[a]);
        }
    }
}

TEST_CASE("no open site in a column") {
    const Window w = line_window(0, 4);
    const long J = 3;
    std::vector<std::uint8_t> open(w.size() * J, 1);
    for (long j = 0; j < J; ++j) open[2 * J + j] = 0;
    CHECK_THROWS_AS(smallest_levels(w, J, open, 0.5), NoSurfaceError);
}

TEST_CASE("site grid from an obstacle field") {
    const ob::Bump bump(2, 0.2, 0.5);
    const ob::Decomposition dec{2, 3.0, 1.0, 0.5, 0.5};
    const auto flat = ob::InitialSurface::flat(2, 0.5);
    ob::Box box;
    box.n = 2;
    box.lo = {-2.0, -2.0, 0.0};
    box.hi = {6.0, 6.0, 0.0};
    box.y_lo = 0.5;
    box.y_hi = 4.0;
    const Window w{2, {0, 0, 0}, {2, 2, 1}, false};

    SUBCASE("empty field") {
        const ob::ObstacleField empty(bump, box, {});
        const auto grid = build_site_grid(empty, dec, flat, 1.0, w, 4);
        CHECK(grid.p_hat() == 0.0);
    }
    SUBCASE("single witness at a cuboid centre") {
        // Column (1, 0), level 2: centre height (1.5) h + r1 = 1.25.
        const ob::ObstacleField one(bump, box, {ob::Obstacle{{4.0, 0.0, 0.0}, 1.25, 2.0}});
        const auto grid = build_site_grid(one, dec, flat, 1.0, w, 4);
        long count = 0;
        for (auto o : grid.open) count += o;
        CHECK(count == 1);
        const std::size_t col = w.flat({1, 0, 0});
        CHECK(grid.is_open(col, 2));
        CHECK(grid.witness[col * 4 + 1].f == 2.0);
        // Too weak for S = 3.
        CHECK(build_site_grid(one, dec, flat, 3.0, w, 4).p_hat() == 0.0);
    }
    SUBCASE("tie-break prefers the strongest, then the lowest") {
        const ob::ObstacleField two(bump, box,
                                    {ob::Obstacle{{0.1, 0.0, 0.0}, 0.6, 2.0}, ob::Obstacle{{0.0, 0.1, 0.0}, 0.9, 5.0},
                                     ob::Obstacle{{0.2, 0.2, 0.0}, 0.7, 5.0}});
        const auto grid = build_site_grid(two, dec, flat, 1.0, w, 4);
        const Witness& wit = grid.witness[0];
        CHECK(wit.f == 5.0);
        CHECK(wit.y == 0.7);
    }
    SUBCASE("coverage") {
        ob::Box small = box;
        small.hi = {3.0, 3.0, 0.0};
        const ob::ObstacleField f(bump, small, {});
        CHECK_THROWS_AS(build_site_grid(f, dec, flat, 1.0, w, 4), CoverageError);
    }
}

TEST_CASE("openness is invariant under the graph transform") {
    ob::ModelParams mp;
    mp.n = 2;
    mp.r0 = 0.2;
    mp.r1 = 0.5;
    mp.lambda = 3.0;
    mp.law = ob::StrengthLaw{ob::StrengthLaw::Kind::ShiftedExponential, 1.0, 1.0};
    const ob::Decomposition dec{2, 3.0, 1.0, 0.4, 0.5};
    const Window w = Window::torus(2, 4);
    const double P = 4 * dec.pitch();
    ob::Box box;
    box.n = 2;
    box.lo = {-0.5 * dec.pitch(), -0.5 * dec.pitch(), 0};
    box.hi = {P - 0.5 * dec.pitch(), P - 0.5 * dec.pitch(), 0};
    box.y_lo = dec.r1;
    box.y_hi = dec.level_top(6);
    auto rng = make_rng(8, Stage::Tests);
    ob::Periodicity flat_per{{P, P, 0}, {0, 0, 0}};
    const auto flat_field = ob::sample_field(mp, box, rng, flat_per);

    const double k = 2.0 * std::numbers::pi / P;
    const ob::InitialSurface U(2, 0.5, {0.3, -0.2, 0}, {ob::Mode{{k, 0, 0}, 0.4, 0.1}}, {P, P, 0});
    std::vector<ob::Obstacle> pushed;
    for (auto o : flat_field.obstacles()) {
        o.y += U.value(std::span<const double>(o.x.data(), 2));
        pushed.push_back(o);
    }
    ob::Periodicity tilt_per{{P, P, 0}, {0.3 * P, -0.2 * P, 0}};
    const ob::ObstacleField tilted(flat_field.bump(), box, pushed, tilt_per);

    const auto g0 = build_site_grid(flat_field, dec, ob::InitialSurface::flat(2, 0.5), 1.5, w, 6);
    const auto g1 = build_site_grid(tilted, dec, U, 1.5, w, 6);
    CHECK(g0.open == g1.open);
    CHECK(g0.p_hat() > 0.0);
}

TEST_CASE("empirical open fraction matches the Poisson formula") {
    ob::ModelParams mp;
    mp.n = 2;
    mp.r0 = 0.1;
    mp.r1 = 0.2;
    mp.lambda = 2.0;
    mp.law = ob::StrengthLaw{ob::StrengthLaw::Kind::ShiftedExponential, 1.0, 1.0};
    const double S = 1.5;
    const ob::Decomposition dec{2, 1.0, 0.2, 0.5, mp.r1};
    const Window w = Window::torus(2, 25);
    const long J = 16;  // 10^4 sites
    const double P = 25 * dec.pitch();
    ob::Box box;
    box.n = 2;
    box.lo = {0, 0, 0};
    box.hi = {P, P, 0};
    box.y_lo = dec.r1;
    box.y_hi = dec.level_top(J);
    auto rng = make_rng(99, Stage::Tests);
    const auto field = ob::sample_field(mp, box, rng, ob::Periodicity{{P, P, 0}, {0, 0, 0}});
    const auto grid = build_site_grid(field, dec, ob::InitialSurface::flat(2, 0.5), S, w, J);
    const double p = open_probability(mp.lambda, dec.h, dec.l, dec.r1, 2, mp.law.tail(S));
    const double sites = static_cast<double>(grid.open.size());
    CHECK(std::abs(grid.p_hat() - p) < 3.0 * std::sqrt(p * (1 - p) / sites));
}

TEST_CASE("Wilson interval") {
    const auto ci = wilson_interval(50, 100);
    CHECK(ci.lo == doctest::Approx(0.4038).epsilon(1e-3));
    CHECK(ci.hi == doctest::Approx(0.5962).epsilon(1e-3));
    CHECK(wilson_interval(0, 100).lo == 0.0);
}

TEST_CASE("tail statistics at p = 0.9") {
    const auto rep = tail_statistics(0.9, 0.5, 1, 16, 4000, 7);
    CHECK_FALSE(rep.regime_warning);
    CHECK(rep.points.front().p_hat == 1.0);
    CHECK(rep.slope <= rep.envelope_slope + 0.1);
    CHECK(rep.mean_y0 <= rep.mean_bound);
    for (std::size_t i = 1; i < rep.points.size(); ++i) CHECK(rep.points[i].count <= rep.points[i - 1].count);

    // A wider planar window only raises y0: the iteration sees more constraints.
    const auto small = tail_statistics(0.9, 0.5, 2, 2, 2000, 7);
    const auto wide = tail_statistics(0.9, 0.5, 2, 4, 2000, 7);
    CHECK(wide.mean_y0 >= small.mean_y0);

    const auto near_one = tail_statistics(0.99999, 0.5, 2, 2, 2000, 7);
    CHECK(near_one.points[1].p_hat < 0.01);
    CHECK(tail_statistics(0.4, 0.5, 1, 3, 100, 1, 12).regime_warning);
}

TEST_CASE("torus columns straddling the origin collect wrapped obstacles") {
    const ob::Decomposition dec{2, 3.0, 1.0, 0.4, 0.5};
    const Window w = Window::torus(2, 3);
    const double P = 3 * dec.pitch();
    ob::Box box;
    box.n = 2;
    box.hi = {P, P, 0};
    box.y_lo = dec.r1;
    box.y_hi = dec.level_top(2);
    // x = -0.5 sits in the core of column (0, 0) and is stored wrapped to P - 0.5.
    std::vector<ob::Obstacle> obs{{{-0.5, 0.2, 0}, dec.level_bottom(1) + 0.1, 2.0}};
    const ob::ObstacleField f(ob::Bump(2, 0.2, 0.5), box, obs, ob::Periodicity{{P, P, 0}, {0, 0, 0}});
    REQUIRE(f.obstacles()[0].x[0] > P - 1.0);
    const auto g = build_site_grid(f, dec, ob::InitialSurface::flat(2, 0.5), 1.0, w, 2);
    CHECK(g.is_open(w.flat({0, 0, 0}), 1));
    CHECK(g.p_hat() == doctest::Approx(1.0 / 18.0));
}
