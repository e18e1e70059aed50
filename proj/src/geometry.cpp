#include "homlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "homlab/util.hpp"

namespace homlab::geometry {

namespace {

double pow2d(int k) { return std::ldexp(1.0, k); }

bool lex_less(const Index& a, const Index& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Ordering used for nearest-defect tie breaks.
bool tie_before(const Index& a, const Index& b) {
    const int na = max_norm(a), nb = max_norm(b);
    if (na != nb) return na < nb;
    return lex_less(a, b);
}

}  // namespace

int max_norm(const Index& p) {
    int m = 0;
    for (int c : p) m = std::max(m, std::abs(c));
    return m;
}

double norm2(const Point& x, int d) {
    double s = 0;
    for (int i = 0; i < d; ++i) s += x[std::size_t(i)] * x[std::size_t(i)];
    return std::sqrt(s);
}

Index make_index(std::initializer_list<int> c) {
    Index p{0, 0, 0, 0};
    std::size_t i = 0;
    for (int v : c) {
        if (i >= kMaxDim) break;
        p[i++] = v;
    }
    return p;
}

Point make_point(std::initializer_list<double> c) {
    Point x{0, 0, 0, 0};
    std::size_t i = 0;
    for (double v : c) {
        if (i >= kMaxDim) break;
        x[i++] = v;
    }
    return x;
}

bool in_index_set(const Index& p, int d, double c0) {
    int mx = 0, mn = 0;
    bool any = false;
    for (int i = 0; i < d; ++i) {
        const int a = std::abs(p[std::size_t(i)]);
        if (a == 0) continue;
        if (!any) {
            mx = mn = a;
            any = true;
        } else {
            mx = std::max(mx, a);
            mn = std::min(mn, a);
        }
    }
    if (!any) return true;
    return double(mx) <= c0 + double(mn);
}

DefectPointSet::DefectPointSet(int d, double c0, int index_bound)
    : d_(d), c0_(c0), index_bound_(index_bound), enum_bound_(index_bound + 3) {
    if (d < 1 || d > kMaxDim) throw ConfigError("DefectPointSet: dimension must be in [1,4]");
    if (!(c0 > 1.0)) throw ConfigError("DefectPointSet: C0 must exceed 1");
    if (index_bound < 1) throw ConfigError("DefectPointSet: index_bound must be >= 1");
    if (enum_bound_ > 26) throw ConfigError("DefectPointSet: index_bound too large for exact norms");

    const int b = enum_bound_;
    Index p{0, 0, 0, 0};
    // Walk the full index cube; the membership rule thins it to O(bound) per shell.
    std::vector<std::pair<double, std::size_t>> order;
    const long side = 2L * b + 1;
    long total = 1;
    for (int i = 0; i < d; ++i) total *= side;
    for (long it = 0; it < total; ++it) {
        long rest = it;
        for (int i = 0; i < d; ++i) {
            p[std::size_t(i)] = int(rest % side) - b;
            rest /= side;
        }
        if (!in_index_set(p, d, c0)) continue;
        Point x{0, 0, 0, 0};
        for (int i = 0; i < d; ++i) {
            const int c = p[std::size_t(i)];
            x[std::size_t(i)] = c == 0 ? 0.0 : (c > 0 ? pow2d(c) : -pow2d(-c));
        }
        indices_.push_back(p);
        points_.push_back(x);
    }
    std::vector<std::size_t> perm(indices_.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t bb) {
        const double na = norm2(points_[a], d_), nb = norm2(points_[bb], d_);
        if (na != nb) return na < nb;
        return tie_before(indices_[a], indices_[bb]);
    });
    std::vector<Index> si(indices_.size());
    std::vector<Point> sp(points_.size());
    norms_.resize(points_.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        si[i] = indices_[perm[i]];
        sp[i] = points_[perm[i]];
        norms_[i] = norm2(sp[i], d_);
    }
    indices_ = std::move(si);
    points_ = std::move(sp);
}

void DefectPointSet::require_bound(int needed, const char* what) const {
    if (needed > enum_bound_) {
        std::ostringstream os;
        os << what << ": needs enumeration up to |p| <= " << needed << " but the set is bounded at "
           << enum_bound_ << " (index_bound " << index_bound_ << ")";
        throw CertificationError(os.str());
    }
}

Point DefectPointSet::point_of(const Index& p) const {
    if (!member(p)) throw ConfigError("point_of: index not in the defect index set");
    Point x{0, 0, 0, 0};
    for (int i = 0; i < d_; ++i) {
        const int c = p[std::size_t(i)];
        x[std::size_t(i)] = c == 0 ? 0.0 : (c > 0 ? pow2d(c) : -pow2d(-c));
    }
    return x;
}

DefectPointSet::Nearest DefectPointSet::nearest(const Point& y) const {
    const double ny = norm2(y, d_);
    // 0 is a member, so the winner satisfies |x_q| <= 2|y|, i.e. |q| <= log2|y| + 1.
    const int needed = ny <= 1.0 ? 1 : int(std::floor(std::log2(ny))) + 1;
    require_bound(needed, "nearest_defect");

    // Scan outward from the norm closest to |y|; prune once the norm gap
    // already exceeds the best distance.
    const auto lb = std::lower_bound(norms_.begin(), norms_.end(), ny);
    std::ptrdiff_t up = lb - norms_.begin();
    std::ptrdiff_t down = up - 1;
    const std::ptrdiff_t n = std::ptrdiff_t(norms_.size());

    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    auto consider = [&](std::ptrdiff_t i) {
        double s = 0;
        for (int a = 0; a < d_; ++a) {
            const double dlt = y[std::size_t(a)] - points_[std::size_t(i)][std::size_t(a)];
            s += dlt * dlt;
        }
        const double dist = std::sqrt(s);
        if (dist < best || (dist == best && tie_before(indices_[std::size_t(i)], indices_[best_i]))) {
            best = dist;
            best_i = std::size_t(i);
        }
    };
    while (up < n || down >= 0) {
        const double gap_up = up < n ? std::abs(norms_[std::size_t(up)] - ny) : std::numeric_limits<double>::infinity();
        const double gap_down = down >= 0 ? std::abs(ny - norms_[std::size_t(down)]) : std::numeric_limits<double>::infinity();
        if (std::min(gap_up, gap_down) > best) break;
        if (gap_up <= gap_down) consider(up++);
        else consider(down--);
    }
    return Nearest{indices_[best_i], best};
}

double DefectPointSet::separation(const Index& p) const {
    if (!member(p)) throw ConfigError("separation: index not in the defect index set");
    require_bound(max_norm(p) + 1, "separation");
    const Point xp = point_of(p);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (indices_[i] == p) continue;
        double s = 0;
        for (int a = 0; a < d_; ++a) {
            const double dlt = xp[std::size_t(a)] - points_[i][std::size_t(a)];
            s += dlt * dlt;
        }
        best = std::min(best, std::sqrt(s));
    }
    return best;
}

bool DefectPointSet::in_dilated_cell(const Index& p, const Point& y) const {
    if (!member(p)) throw ConfigError("in_dilated_cell: index not in the defect index set");
    const Point xp = point_of(p);
    Point pulled{0, 0, 0, 0};
    for (int a = 0; a < d_; ++a)
        pulled[std::size_t(a)] = xp[std::size_t(a)] + (2.0 / 3.0) * (y[std::size_t(a)] - xp[std::size_t(a)]);
    return nearest(pulled).index == p;
}

int DefectPointSet::count_in_annulus(int n) const {
    if (n < 0) throw ConfigError("count_in_annulus: n must be >= 0");
    require_bound(n + 1, "count_in_annulus");
    const double lo = pow2d(n), hi = pow2d(n + 1);
    int count = 0;
    for (double nm : norms_)
        if (nm >= lo && nm < hi) ++count;
    return count;
}

std::vector<Index> DefectPointSet::cells_intersecting_ball(const Point& x0, double R) const {
    if (!(R > 0)) throw ConfigError("cells_intersecting_ball: R must be positive");
    const double Rp = std::max(R, 1.0);

    if (d_ == 1) {
        // Interval Voronoi boundaries are midpoints of consecutive points.
        // Owners live within 2(|x0|+R); their deciding neighbors as well.
        const double reach = std::abs(x0[0]) + Rp;
        const int needed = reach <= 1.0 ? 1 : int(std::floor(std::log2(reach))) + 1;
        require_bound(needed, "cells_intersecting_ball");
        std::vector<Index> out;
        for (std::size_t i = 0; i < points_.size(); ++i) {
            // Recover this cell's interval from its two norm-neighbors on the line.
            const double xi = points_[i][0];
            double left = -std::numeric_limits<double>::infinity();
            double right = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < points_.size(); ++j) {
                if (j == i) continue;
                const double xj = points_[j][0];
                if (xj < xi) left = std::max(left, 0.5 * (xi + xj));
                else if (xj > xi) right = std::min(right, 0.5 * (xi + xj));
            }
            if (right >= x0[0] - R && left <= x0[0] + R) out.push_back(indices_[i]);
        }
        std::sort(out.begin(), out.end(), tie_before);
        return out;
    }

    // The log cell-count proof guarantees every returned owner lies inside
    // B_{8 max(R,1)}(x0); computationally the nearest queries at sampled ball
    // points are what needs certification.
    const double reach = norm2(x0, d_) + Rp;
    const int needed = reach <= 1.0 ? 1 : int(std::floor(std::log2(reach))) + 1;
    require_bound(needed, "cells_intersecting_ball");

    std::vector<Index> found;
    auto add = [&](const Point& y) { found.push_back(nearest(y).index); };
    add(x0);
    // Cells at distance r from x0 have diameter ~ c r by (H2), i.e. a roughly
    // scale-free angular width, so dyadic shells at radii R, R/2, ... with a
    // fixed direction fan bound the per-shell false-negative risk. Interleaved
    // intermediate radii halve the radial gaps.
    const std::size_t dirs = d_ == 2 ? 512 : 1024;
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Point> fan;
    fan.reserve(dirs);
    for (std::size_t i = 0; i < dirs; ++i) {
        Point u{0, 0, 0, 0};
        if (d_ == 2) {
            const double t = 2.0 * M_PI * (double(i) + 0.5) / double(dirs);
            u[0] = std::cos(t);
            u[1] = std::sin(t);
        } else {
            const double z = 1.0 - 2.0 * (double(i) + 0.5) / double(dirs);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double t = 2.0 * M_PI * double(i) / golden;
            u[0] = r * std::cos(t);
            u[1] = r * std::sin(t);
            u[2] = z;
        }
        fan.push_back(u);
    }
    for (double r = R;; r *= 0.5) {
        for (double scale : {1.0, 0.75}) {
            const double rr = r * scale;
            if (rr > R) continue;
            for (const Point& u : fan) {
                Point y = x0;
                for (int a = 0; a < d_; ++a) y[std::size_t(a)] += rr * u[std::size_t(a)];
                add(y);
            }
        }
        if (r < 0.5) break;
    }
    std::sort(found.begin(), found.end(), tie_before);
    found.erase(std::unique(found.begin(), found.end()), found.end());
    return found;
}

GeometryCertificate certify_assumptions(const DefectPointSet& set, long min_inclusion_samples) {
    if (set.index_bound() < 4) throw ConfigError("certify_assumptions: index_bound must be >= 4");
    const int d = set.dim();
    const int bound = set.index_bound();
    GeometryCertificate cert;
    cert.h2_ratio_min = std::numeric_limits<double>::infinity();
    cert.h2_ratio_max = 0.0;
    cert.h3_ratio_max = 0.0;

    std::vector<std::size_t> measured;
    for (std::size_t i = 0; i < set.indices().size(); ++i)
        if (max_norm(set.indices()[i]) <= bound) measured.push_back(i);

    // Directions for the sampled-extent diameter surrogate.
    std::vector<Point> dirs;
    if (d == 1) {
        dirs.push_back(make_point({1.0}));
        dirs.push_back(make_point({-1.0}));
    } else {
        const std::size_t m = d == 2 ? 64 : 128;
        for (std::size_t i = 0; i < m; ++i) {
            Point u{0, 0, 0, 0};
            if (d == 2) {
                const double t = 2.0 * M_PI * double(i) / double(m);
                u[0] = std::cos(t);
                u[1] = std::sin(t);
            } else {
                const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
                const double z = 1.0 - 2.0 * (double(i) + 0.5) / double(m);
                const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
                const double t = 2.0 * M_PI * double(i) / golden;
                u[0] = r * std::cos(t);
                u[1] = r * std::sin(t);
                u[2] = z;
            }
            dirs.push_back(u);
        }
    }

    for (std::size_t i : measured) {
        const Index p = set.indices()[i];
        if (max_norm(p) == 0) continue;  // the ratios measure growth against |x_p|
        const Point xp = set.points()[i];
        const double nx = norm2(xp, d);
        const double D = set.separation(p);
        const double h2 = (1.0 + nx) / D;
        cert.h2_ratio_min = std::min(cert.h2_ratio_min, h2);
        cert.h2_ratio_max = std::max(cert.h2_ratio_max, h2);

        double diam;
        int nonzero = 0;
        for (int a = 0; a < d; ++a) nonzero += set.indices()[i][std::size_t(a)] != 0;
        if (d == 1) {
            // Exact interval cell.
            double left = -std::numeric_limits<double>::infinity(), right = left * -1.0;
            right = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < set.points().size(); ++j) {
                if (j == i) continue;
                const double xj = set.points()[j][0];
                if (xj < xp[0]) left = std::max(left, 0.5 * (xp[0] + xj));
                else if (xj > xp[0]) right = std::min(right, 0.5 * (xp[0] + xj));
            }
            diam = right - left;
        } else if (d == 2 && nonzero == 2) {
            // Certified bounding box diagonal.
            const int q1 = std::abs(p[0]), q2 = std::abs(p[1]);
            const int pm = std::max(q1, q2);
            const double e1 = std::ldexp(1.0, pm + 1) - std::ldexp(1.0, q1 - 1);
            const double e2 = std::ldexp(1.0, pm + 1) - std::ldexp(1.0, q2 - 1);
            diam = std::sqrt(e1 * e1 + e2 * e2);
        } else {
            // Sampled extent along a deterministic direction fan.
            const double t_hi = 3.0 * (1.0 + nx);
            double ext = 0.0;
            for (const Point& u : dirs) {
                double lo = 0.0, hi = t_hi;
                // Cell membership along a ray from x_p is an interval.
                auto inside = [&](double t) {
                    Point y = xp;
                    for (int a = 0; a < d; ++a) y[std::size_t(a)] += t * u[std::size_t(a)];
                    return set.nearest(y).index == p;
                };
                if (inside(hi)) throw CertificationError("certify_assumptions: cell extent not bounded within the certified range");
                for (int it = 0; it < 40; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (inside(mid) ? lo : hi) = mid;
                }
                ext = std::max(ext, hi);
            }
            diam = 2.0 * ext;
        }
        cert.h3_ratio_max = std::max(cert.h3_ratio_max, diam / D);
    }

    for (int n = 0; n < bound; ++n) cert.annulus_counts.push_back(set.count_in_annulus(n));
    cert.annulus_count_max = *std::max_element(cert.annulus_counts.begin(), cert.annulus_counts.end());

    // Log cell-count law over a dyadic radius ladder.
    {
        std::vector<double> xs, ys;
        const int top = std::min(bound, 20);
        for (int k = 4; k <= top; ++k) {
            const double R = std::ldexp(1.0, k);
            xs.push_back(double(k));
            ys.push_back(double(set.cells_intersecting_ball(make_point({0.0}), R).size()));
        }
        const AffineFit fit = fit_affine(xs, ys);
        cert.cell_count_fit = CellCountFit{fit.slope, fit.intercept, fit.r2};
    }

    // d=2 bounding-box inclusion check over the all-nonzero cells.
    if (d == 2) {
        std::vector<std::size_t> boxed;
        for (std::size_t i : measured) {
            const Index& p = set.indices()[i];
            if (p[0] != 0 && p[1] != 0) boxed.push_back(i);
        }
        const long per_cell = std::max<long>(256, (min_inclusion_samples + long(boxed.size()) - 1) / std::max<long>(1, long(boxed.size())));
        for (std::size_t i : boxed) {
            const Index& p = set.indices()[i];
            const int q1 = std::abs(p[0]), q2 = std::abs(p[1]);
            const int pm = std::max(q1, q2);
            const double s1 = p[0] > 0 ? 1.0 : -1.0;
            const double s2 = p[1] > 0 ? 1.0 : -1.0;
            const double blo1 = std::ldexp(1.0, q1 - 1), blo2 = std::ldexp(1.0, q2 - 1);
            const double bhi = std::ldexp(1.0, pm + 1);
            // Sample a dilated region around the certified box; the outward
            // margin keeps sample norms inside the certified enumeration.
            const double margin = std::ldexp(1.0, pm - 1);
            const double lo1 = std::max(0.0, blo1 - margin), hi1 = bhi + margin;
            const double lo2 = std::max(0.0, blo2 - margin), hi2 = bhi + margin;
            for (long s = 0; s < per_cell; ++s) {
                const auto hp = halton_point(std::uint64_t(s), 2);
                const double z1 = lo1 + hp[0] * (hi1 - lo1);
                const double z2 = lo2 + hp[1] * (hi2 - lo2);
                const Point y = make_point({s1 * z1, s2 * z2});
                ++cert.sampled_points;
                if (set.nearest(y).index != p) continue;
                if (z1 < blo1 || z1 > bhi || z2 < blo2 || z2 > bhi) ++cert.inclusion_violations;
            }
        }
    }
    return cert;
}

bool exhaustion_check(const DefectPointSet& set, int axis, int n_max) {
    if (n_max < 2) throw ConfigError("exhaustion_check: n_max must be >= 2");
    if (axis < 0 || axis >= set.dim()) throw ConfigError("exhaustion_check: axis out of range");
    const int d = set.dim();
    // Fixed H2 constant: c = min_n D(x_{p_n})/2^{n+1}, so B_{c 2^n}(x_{p_n})
    // sits inside the guaranteed half-gap ball and the recentred balls nest.
    double c = std::numeric_limits<double>::infinity();
    for (int n = 2; n <= n_max; ++n) {
        Index p{0, 0, 0, 0};
        p[std::size_t(axis)] = n;
        c = std::min(c, 0.5 * set.separation(p) / std::ldexp(1.0, n));
    }
    if (!(c > 0)) return false;
    double prev_radius = 0.0;
    bool box_contained = false;
    const double box_radius = 3.0 * std::sqrt(double(d));
    for (int n = 2; n <= n_max; ++n) {
        Index p{0, 0, 0, 0};
        p[std::size_t(axis)] = n;
        const Point xp = set.point_of(p);
        const double radius = c * std::ldexp(1.0, n);
        if (radius <= prev_radius) return false;
        // The guaranteed ball: every sampled boundary point must classify to p.
        const int m = d == 1 ? 2 : 64;
        for (int i = 0; i < m; ++i) {
            Point y = xp;
            if (d == 1) {
                y[0] += (i == 0 ? 1.0 : -1.0) * radius * 0.999;
            } else if (d == 2) {
                const double t = 2.0 * M_PI * double(i) / double(m);
                y[0] += radius * 0.999 * std::cos(t);
                y[1] += radius * 0.999 * std::sin(t);
            } else {
                const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
                const double z = 1.0 - 2.0 * (double(i) + 0.5) / double(m);
                const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
                const double t = 2.0 * M_PI * double(i) / golden;
                y[0] += radius * 0.999 * r * std::cos(t);
                y[1] += radius * 0.999 * r * std::sin(t);
                y[2] += radius * 0.999 * z;
            }
            if (set.nearest(y).index != p) return false;
        }
        if (radius >= box_radius) box_contained = true;
        prev_radius = radius;
    }
    return box_contained;
}

std::string GeometryCertificate::to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"h2_ratio_min\":" << h2_ratio_min << ",\"h2_ratio_max\":" << h2_ratio_max
       << ",\"h3_ratio_max\":" << h3_ratio_max << ",\"annulus_count_max\":" << annulus_count_max
       << ",\"annulus_counts\":[";
    for (std::size_t i = 0; i < annulus_counts.size(); ++i)
        os << (i ? "," : "") << annulus_counts[i];
    os << "],\"cell_count_fit\":{\"slope\":" << cell_count_fit.slope
       << ",\"intercept\":" << cell_count_fit.intercept << ",\"r2\":" << cell_count_fit.r2
       << "},\"inclusion_violations\":" << inclusion_violations
       << ",\"sampled_points\":" << sampled_points << "}";
    return os.str();
}

}  // namespace homlab::geometry
