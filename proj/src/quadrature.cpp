#include "pinning/quadrature.hpp"

#include <cmath>
#include <algorithm>
#include <queue>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace pinning::quad {

using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;

Estimate panel(const std::function<double(double)>& f, double a, double b) {
    if (a == b) return {};
    Estimate out;
    double l1 = 0.0;
    out.value = Rule::integrate(f, a, b, 0, 0.0, &out.error, &l1);
    return out;
}

namespace {

struct Piece {
    double a;
    double b;
    Estimate est;
    unsigned order;
    bool operator<(const Piece& o) const {
        if (est.error != o.est.error) return est.error < o.est.error;
        return order > o.order;
    }
};

}  // namespace

Estimate adaptive(const std::function<double(double)>& f, double a, double b, double rel_tol,
                  unsigned max_panels, double abs_tol) {
    if (a == b) return {};
    std::priority_queue<Piece> heap;
    unsigned order = 0;
    Piece first{a, b, panel(f, a, b), order++};
    double value = first.est.value;
    double error = first.est.error;
    heap.push(first);
    while (heap.size() < max_panels && error > std::max(abs_tol, rel_tol * std::abs(value))) {
        Piece worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            heap.push(worst);
            break;
        }
        Piece left{worst.a, mid, panel(f, worst.a, mid), order++};
        Piece right{mid, worst.b, panel(f, mid, worst.b), order++};
        value += left.est.value + right.est.value - worst.est.value;
        error += left.est.error + right.est.error - worst.est.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum from the pieces to avoid drift in the running totals.
    Estimate out;
    std::vector<Piece> pieces;
    pieces.reserve(heap.size());
    while (!heap.empty()) {
        pieces.push_back(heap.top());
        heap.pop();
    }
    std::sort(pieces.begin(), pieces.end(), [](const Piece& x, const Piece& y) { return x.a < y.a; });
    for (const Piece& p : pieces) {
        out.value += p.est.value;
        out.error += p.est.error;
    }
    return out;
}

}  // namespace pinning::quad
