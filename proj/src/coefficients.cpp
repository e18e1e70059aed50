#include "homlab/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "homlab/errors.hpp"

namespace homlab::coefficients {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

SymMat SymMat::scaled_identity(int d, double c) {
    SymMat a;
    a.d = d;
    for (int i = 0; i < d; ++i) a.at(i, i) = c;
    return a;
}

double SymMat::min_eigenvalue() const {
    // Cyclic Jacobi rotations on a copy; dimensions are at most 4.
    std::array<double, 16> a = m;
    auto A = [&](int i, int j) -> double& { return a[std::size_t(i * 4 + j)]; };
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) off += A(i, j) * A(i, j);
        if (off < 1e-30) break;
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                if (std::abs(A(p, q)) < 1e-300) continue;
                const double theta = 0.5 * std::atan2(2.0 * A(p, q), A(q, q) - A(p, p));
                const double c = std::cos(theta), s = std::sin(theta);
                for (int k = 0; k < d; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    double mn = A(0, 0);
    for (int i = 1; i < d; ++i) mn = std::min(mn, A(i, i));
    return mn;
}

double PeriodicCoefficient::eval_entry(int i, int j, const Point& y) const {
    const Entry* e = nullptr;
    if (diagonal) {
        if (i != j) return 0.0;
        e = &entries[std::size_t(i)];
    } else {
        const int a = std::min(i, j), b = std::max(i, j);
        // packed upper triangle, row by row
        const int idx = a * d - a * (a - 1) / 2 + (b - a);
        e = &entries[std::size_t(idx)];
    }
    double v = e->constant;
    for (const Term& t : e->terms) {
        double prod = t.coeff;
        for (int ax = 0; ax < d; ++ax) {
            if (t.freq[std::size_t(ax)] == 0 && t.phase[std::size_t(ax)] == 0.0) continue;
            prod *= std::cos(kTwoPi * t.freq[std::size_t(ax)] * y[std::size_t(ax)] + t.phase[std::size_t(ax)]);
        }
        v += prod;
    }
    return v;
}

SymMat PeriodicCoefficient::eval(const Point& y) const {
    SymMat a;
    a.d = d;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            const double v = eval_entry(i, j, y);
            a.at(i, j) = v;
            a.at(j, i) = v;
        }
    return a;
}

PeriodicCoefficient PeriodicCoefficient::preset(const std::string& name, int d, double value) {
    PeriodicCoefficient a;
    a.d = d;
    a.diagonal = true;
    a.entries.assign(std::size_t(d), Entry{});
    auto set_all_const = [&](double c) {
        for (auto& e : a.entries) e.constant = c;
    };
    if (name == "identity") {
        set_all_const(1.0);
    } else if (name == "constant") {
        set_all_const(value);
    } else if (name == "sin1d") {
        // (2 + sin(2 pi y_1)) Id
        set_all_const(2.0);
        for (auto& e : a.entries) {
            Term t;
            t.coeff = 1.0;
            t.freq[0] = 1;
            t.phase[0] = -0.5 * M_PI;  // sin
            e.terms.push_back(t);
        }
    } else if (name == "laminate2d") {
        if (d != 2) throw ConfigError("laminate2d preset needs d=2");
        a.entries[0].constant = 2.0;
        Term t;
        t.coeff = 1.0;
        t.freq[0] = 1;
        a.entries[0].terms.push_back(t);
        a.entries[1].constant = 3.0;
    } else if (name == "product2d") {
        if (d != 2) throw ConfigError("product2d preset needs d=2");
        // (2 + cos 2pi y1)(2 + cos 2pi y2) Id
        for (auto& e : a.entries) {
            e.constant = 4.0;
            Term t1;
            t1.coeff = 2.0;
            t1.freq[0] = 1;
            e.terms.push_back(t1);
            Term t2;
            t2.coeff = 2.0;
            t2.freq[1] = 1;
            e.terms.push_back(t2);
            Term t12;
            t12.coeff = 1.0;
            t12.freq[0] = 1;
            t12.freq[1] = 1;
            e.terms.push_back(t12);
        }
    } else if (name == "checker3d") {
        if (d != 3) throw ConfigError("checker3d preset needs d=3");
        for (auto& e : a.entries) {
            e.constant = 2.0;
            Term t;
            t.coeff = 1.0;
            t.freq = {1, 1, 1, 0};
            e.terms.push_back(t);
        }
    } else {
        throw ConfigError("unknown periodic preset: " + name);
    }
    return a;
}

double DefectProfile::support_radius(int gen) const {
    const double scale = normalization == Normalization::CellNormalized ? std::ldexp(1.0, gen) : 1.0;
    if (kind == ProfileKind::Bump) return rho * scale;
    return normalization == Normalization::CellNormalized ? std::min(r_cut, 0.25) * scale : r_cut;
}

double DefectProfile::peak_amplitude(int gen, int d) const {
    if (kind == ProfileKind::Bump && normalization == Normalization::CellNormalized)
        return amplitude * std::pow(2.0, -0.5 * double(gen) * double(d));
    return amplitude;
}

double DefectProfile::value(double r, int gen, int d) const {
    if (max_generation >= 0 && gen > max_generation) return 0.0;
    const double s = support_radius(gen);
    if (r >= s) return 0.0;
    if (kind == ProfileKind::Bump) {
        const double t = r / s;
        return peak_amplitude(gen, d) * std::exp(1.0 - 1.0 / (1.0 - t * t));
    }
    return peak_amplitude(gen, d) * std::pow(1.0 + r / rho, -beta);
}

double DefectProfile::copy_mass(int gen, int d) const {
    const double s = support_radius(gen);
    const double surface = d == 1 ? 2.0 : (d == 2 ? kTwoPi : 2.0 * kTwoPi);
    // Radial integral of |value| r^{d-1} times the unit-sphere surface.
    const double integral = simpson(
        [&](double r) { return std::abs(value(r, gen, d)) * (d == 1 ? 1.0 : std::pow(r, d - 1)); }, 0.0,
        s, 4096);
    return surface * integral;
}

void DefectProfile::validate() const {
    if (!(amplitude == amplitude)) throw ConfigError("profile: amplitude must be finite");
    if (!(rho > 0)) throw ConfigError("profile: rho must be positive");
    if (kind == ProfileKind::Bump) {
        const double cap = normalization == Normalization::CellNormalized ? 0.25 : 0.5;
        if (rho > cap) {
            std::ostringstream os;
            os << "profile: bump support radius " << rho << " exceeds " << cap
               << " and copies would overlap neighboring cells";
            throw ConfigError(os.str());
        }
    } else {
        if (!(beta > 0)) throw ConfigError("profile: algebraic beta must be positive");
        if (!(r_cut > 0)) throw ConfigError("profile: algebraic cutoff must be positive");
        if (normalization == Normalization::Identical && r_cut > 1.0)
            throw ConfigError("profile: identical algebraic cutoff must stay within the unit half-gap");
    }
}

PerturbedCoefficient::PerturbedCoefficient(PeriodicCoefficient per,
                                           std::optional<DefectProfile> profile,
                                           std::shared_ptr<geometry::DefectPointSet> set,
                                           DefectSupport support)
    : per_(std::move(per)), profile_(std::move(profile)), set_(std::move(set)), support_(support) {
    if (!set_) throw ConfigError("PerturbedCoefficient: defect set required");
    if (per_.d != set_->dim()) throw ConfigError("PerturbedCoefficient: dimension mismatch");
    if (profile_) {
        profile_->validate();
        // Copies must stay inside their own cells: the nearest-defect lookup
        // in defect_scalar assumes single coverage.
        for (std::size_t i = 0; i < set_->indices().size(); ++i) {
            const Index& p = set_->indices()[i];
            if (geometry::max_norm(p) > set_->index_bound()) continue;
            const double s = profile_->support_radius(geometry::max_norm(p));
            const double half_gap = 0.5 * set_->separation(p);
            if (s > half_gap * (1.0 + 1e-12)) {
                std::ostringstream os;
                os << "profile support radius " << s << " at generation " << geometry::max_norm(p)
                   << " exceeds half the defect separation " << half_gap;
                throw ConfigError(os.str());
            }
        }
    }
    lambda_check_ = ellipticity_floor(*this, 24);
    if (!(lambda_check_ > 0))
        throw ConfigError("PerturbedCoefficient: sampled ellipticity floor is not positive");
}

double PerturbedCoefficient::defect_scalar(const Point& x) const {
    if (!profile_) return 0.0;
    if (support_ == DefectSupport::OriginOnly) {
        const double r = geometry::norm2(x, per_.d);
        return profile_->value(r, 0, per_.d);
    }
    const auto nd = set_->nearest(x);
    const int gen = geometry::max_norm(nd.index);
    return profile_->value(nd.distance, gen, per_.d);
}

double PerturbedCoefficient::eval_diag_entry(int axis, const Point& x) const {
    return per_.eval_diag(axis, x) + defect_scalar(x);
}

SymMat PerturbedCoefficient::eval(const Point& x) const {
    SymMat a = per_.eval(x);
    const double tilde = defect_scalar(x);
    for (int i = 0; i < a.d; ++i) a.at(i, i) += tilde;
    // Gershgorin first; fall back to the exact eigenvalue only when the cheap
    // bound cannot certify the floor.
    double gersh = std::numeric_limits<double>::infinity();
    for (int i = 0; i < a.d; ++i) {
        double row = a.at(i, i);
        for (int j = 0; j < a.d; ++j)
            if (j != i) row -= std::abs(a.at(i, j));
        gersh = std::min(gersh, row);
    }
    if (gersh < lambda_check_ * (1.0 - 1e-12)) {
        if (a.min_eigenvalue() < lambda_check_ * (1.0 - 1e-12)) {
            std::ostringstream os;
            os << "coefficient lost ellipticity at x=(";
            for (int i = 0; i < a.d; ++i) os << (i ? "," : "") << x[std::size_t(i)];
            os << ")";
            throw NumericalError(os.str());
        }
    }
    return a;
}

std::uint64_t PerturbedCoefficient::content_hash() const {
    std::ostringstream os;
    os.precision(17);
    os << per_.d << '|' << per_.diagonal;
    for (const auto& e : per_.entries) {
        os << '|' << e.constant;
        for (const auto& t : e.terms) {
            os << ';' << t.coeff;
            for (int k = 0; k < 4; ++k) os << ',' << t.freq[std::size_t(k)] << ',' << t.phase[std::size_t(k)];
        }
    }
    if (profile_) {
        os << "|prof:" << int(profile_->kind) << ',' << profile_->amplitude << ',' << profile_->rho << ','
           << profile_->beta << ',' << profile_->r_cut << ',' << int(profile_->normalization) << ','
           << profile_->max_generation;
    }
    os << "|set:" << set_->dim() << ',' << set_->c0() << ',' << set_->index_bound()
       << "|sup:" << int(support_);
    return fnv1a64(os.str());
}

std::vector<DefectSplat> active_defects(const PerturbedCoefficient& coef, const Point& lo,
                                        const Point& hi, double scale) {
    std::vector<DefectSplat> out;
    if (!coef.has_defects()) return out;
    const auto& set = coef.set();
    const int d = coef.dim();
    for (std::size_t i = 0; i < set.points().size(); ++i) {
        if (coef.support() == DefectSupport::OriginOnly && geometry::max_norm(set.indices()[i]) != 0)
            continue;
        const int gen = geometry::max_norm(set.indices()[i]);
        if (coef.profile()->max_generation >= 0 && gen > coef.profile()->max_generation) continue;
        const double radius = scale * coef.profile()->support_radius(gen);
        Point c{};
        bool touches = true;
        for (int a = 0; a < d; ++a) {
            c[std::size_t(a)] = scale * set.points()[i][std::size_t(a)];
            if (c[std::size_t(a)] + radius < lo[std::size_t(a)] ||
                c[std::size_t(a)] - radius > hi[std::size_t(a)])
                touches = false;
        }
        if (touches) out.push_back(DefectSplat{c, radius, gen});
    }
    return out;
}

namespace {

// Uniform lattice covering the certified bounding region of V_p.
struct CellRegion {
    Point lo{}, hi{};
};

CellRegion cell_region(const geometry::DefectPointSet& set, const Index& p) {
    const int d = set.dim();
    const Point xp = set.point_of(p);
    CellRegion r;
    if (d == 1) {
        double left = -std::numeric_limits<double>::infinity();
        double right = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < set.points().size(); ++j) {
            const double xj = set.points()[j][0];
            if (xj < xp[0]) left = std::max(left, 0.5 * (xp[0] + xj));
            else if (xj > xp[0]) right = std::min(right, 0.5 * (xp[0] + xj));
        }
        r.lo[0] = left;
        r.hi[0] = right;
        return r;
    }
    const int pm = geometry::max_norm(p);
    bool all_nonzero = true;
    for (int a = 0; a < d; ++a) all_nonzero = all_nonzero && p[std::size_t(a)] != 0;
    if (d == 2 && all_nonzero) {
        for (int a = 0; a < 2; ++a) {
            const int q = std::abs(p[std::size_t(a)]);
            const double blo = std::ldexp(1.0, q - 1), bhi = std::ldexp(1.0, pm + 1);
            if (p[std::size_t(a)] > 0) {
                r.lo[std::size_t(a)] = blo;
                r.hi[std::size_t(a)] = bhi;
            } else {
                r.lo[std::size_t(a)] = -bhi;
                r.hi[std::size_t(a)] = -blo;
            }
        }
        return r;
    }
    // Fallback: a generous box around x_p sized by the H3-style extent.
    const double ext = 2.0 * std::ldexp(1.0, pm + 1);
    for (int a = 0; a < d; ++a) {
        r.lo[std::size_t(a)] = xp[std::size_t(a)] - ext;
        r.hi[std::size_t(a)] = xp[std::size_t(a)] + ext;
    }
    return r;
}

}  // namespace

double cell_norm(const PerturbedCoefficient& coef, const Index& p, double r, double resolution,
                 CellField which) {
    if (!(r > 1.0)) throw ConfigError("cell_norm: exponent r must exceed 1");
    if (!(resolution > 0)) throw ConfigError("cell_norm: resolution must be positive");
    const auto& set = coef.set();
    const int d = set.dim();
    const Point xp = set.point_of(p);
    const int gen = geometry::max_norm(p);
    const CellRegion region = cell_region(set, p);

    std::array<long, 4> n{};
    long total = 1;
    for (int a = 0; a < d; ++a) {
        n[std::size_t(a)] = std::max(2L, long(std::ceil((region.hi[std::size_t(a)] - region.lo[std::size_t(a)]) / resolution)));
        total *= n[std::size_t(a)];
        if (total > 80'000'000L) throw NumericalError("cell_norm: quadrature lattice too large for the requested resolution");
    }
    double vol_el = 1.0;
    std::array<double, 4> h{};
    for (int a = 0; a < d; ++a) {
        h[std::size_t(a)] = (region.hi[std::size_t(a)] - region.lo[std::size_t(a)]) / double(n[std::size_t(a)]);
        vol_el *= h[std::size_t(a)];
    }
    double acc = 0.0;
    for (long it = 0; it < total; ++it) {
        long rest = it;
        Point y{};
        for (int a = 0; a < d; ++a) {
            const long ia = rest % n[std::size_t(a)];
            rest /= n[std::size_t(a)];
            y[std::size_t(a)] = region.lo[std::size_t(a)] + (double(ia) + 0.5) * h[std::size_t(a)];
        }
        if (set.nearest(y).index != p) continue;
        double v = coef.defect_scalar(y);
        if (which == CellField::DefectResidual) {
            double rr = 0;
            for (int a = 0; a < d; ++a) {
                const double dd = y[std::size_t(a)] - xp[std::size_t(a)];
                rr += dd * dd;
            }
            if (coef.has_defects()) v -= coef.profile()->value(std::sqrt(rr), gen, d);
        }
        acc += std::pow(std::abs(v), r) * vol_el;
    }
    return std::pow(acc, 1.0 / r);
}

DecayReport average_decay(const PerturbedCoefficient& coef, const Point& x0,
                          const std::vector<double>& radii) {
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (!(radii[i] > radii[i - 1])) throw ConfigError("average_decay: radii must increase");
    const int d = coef.dim();
    DecayReport rep;
    if (radii.empty()) return rep;

    std::vector<DefectSplat> splats;
    if (coef.has_defects()) {
        Point lo{}, hi{};
        const double top = radii.back() + 1.0;
        for (int a = 0; a < d; ++a) {
            lo[std::size_t(a)] = x0[std::size_t(a)] - top;
            hi[std::size_t(a)] = x0[std::size_t(a)] + top;
        }
        splats = active_defects(coef, lo, hi, 1.0);
    }
    // Cache full-copy masses by generation.
    std::map<int, double> mass;
    for (const auto& s : splats)
        if (!mass.count(s.gen)) mass[s.gen] = coef.profile()->copy_mass(s.gen, d);

    std::vector<double> lx, ly;
    for (double R : radii) {
        double total = 0.0;
        for (const auto& s : splats) {
            double dist = 0;
            for (int a = 0; a < d; ++a) {
                const double dd = s.center[std::size_t(a)] - x0[std::size_t(a)];
                dist += dd * dd;
            }
            dist = std::sqrt(dist);
            if (dist + s.radius <= R) {
                total += mass[s.gen];
            } else if (dist - s.radius < R) {
                // Copy clipped by the ball: local midpoint lattice on its support.
                const int m = 48;
                const double hh = 2.0 * s.radius / m;
                double acc = 0;
                long cells = 1;
                for (int a = 0; a < d; ++a) cells *= m;
                for (long it = 0; it < cells; ++it) {
                    long rest = it;
                    Point y{};
                    double r2 = 0, b2 = 0;
                    for (int a = 0; a < d; ++a) {
                        const long ia = rest % m;
                        rest /= m;
                        y[std::size_t(a)] = s.center[std::size_t(a)] - s.radius + (double(ia) + 0.5) * hh;
                        const double dc = y[std::size_t(a)] - s.center[std::size_t(a)];
                        r2 += dc * dc;
                        const double db = y[std::size_t(a)] - x0[std::size_t(a)];
                        b2 += db * db;
                    }
                    if (b2 > R * R) continue;
                    acc += std::abs(coef.profile()->value(std::sqrt(r2), s.gen, d)) * std::pow(hh, d);
                }
                total += acc;
            }
        }
        const double vol = d == 1 ? 2.0 * R : (d == 2 ? M_PI * R * R : 4.0 / 3.0 * M_PI * R * R * R);
        DecayRow row;
        row.radius = R;
        row.mean = total / vol;
        row.bound_ratio = row.mean / std::sqrt(std::log(std::max(R, 2.0)) / std::pow(R, d));
        rep.rows.push_back(row);
        if (row.mean > 0) {
            lx.push_back(std::log(R));
            ly.push_back(std::log(row.mean));
        }
    }
    rep.fit = fit_affine(lx, ly);
    return rep;
}

double tail_uniform(const PerturbedCoefficient& coef, double R, int index_bound, double resolution) {
    if (!(R > 0)) throw ConfigError("tail_uniform: R must be positive");
    const auto& set = coef.set();
    const int d = set.dim();
    double sup = 0.0;
    for (std::size_t qi = 0; qi < set.indices().size(); ++qi) {
        const Index q = set.indices()[qi];
        if (geometry::max_norm(q) > index_bound) continue;
        const Point xq = set.points()[qi];
        const CellRegion region = cell_region(set, q);
        std::array<long, 4> n{};
        long total = 1;
        for (int a = 0; a < d; ++a) {
            n[std::size_t(a)] = std::max(2L, long(std::ceil((region.hi[std::size_t(a)] - region.lo[std::size_t(a)]) / resolution)));
            total *= n[std::size_t(a)];
            if (total > 80'000'000L) throw NumericalError("tail_uniform: quadrature lattice too large");
        }
        std::array<double, 4> h{};
        double vol_el = 1.0;
        for (int a = 0; a < d; ++a) {
            h[std::size_t(a)] = (region.hi[std::size_t(a)] - region.lo[std::size_t(a)]) / double(n[std::size_t(a)]);
            vol_el *= h[std::size_t(a)];
        }
        for (std::size_t pi = 0; pi < set.indices().size(); ++pi) {
            const Index p = set.indices()[pi];
            if (geometry::max_norm(p) > index_bound || p == q) continue;
            const Point xpp = set.points()[pi];
            double acc = 0.0;
            for (long it = 0; it < total; ++it) {
                long rest = it;
                Point y{};
                for (int a = 0; a < d; ++a) {
                    const long ia = rest % n[std::size_t(a)];
                    rest /= n[std::size_t(a)];
                    y[std::size_t(a)] = region.lo[std::size_t(a)] + (double(ia) + 0.5) * h[std::size_t(a)];
                }
                double dq = 0;
                for (int a = 0; a < d; ++a) {
                    const double dd = y[std::size_t(a)] - xq[std::size_t(a)];
                    dq += dd * dd;
                }
                if (dq <= R * R) continue;  // only the region beyond B_R(x_q)
                if (set.nearest(y).index != q) continue;
                double v = coef.defect_scalar(y);
                if (coef.has_defects()) {
                    double rp = 0;
                    for (int a = 0; a < d; ++a) {
                        const double dd = y[std::size_t(a)] - xpp[std::size_t(a)];
                        rp += dd * dd;
                    }
                    v -= coef.profile()->value(std::sqrt(rp), geometry::max_norm(p), d);
                }
                acc += v * v * vol_el;
            }
            sup = std::max(sup, std::sqrt(acc));
        }
    }
    return sup;
}

double holder_spot_check(const PerturbedCoefficient& coef, double alpha, int pairs_per_scale) {
    if (!(alpha > 0.0) || alpha >= 1.0) throw ConfigError("holder_spot_check: alpha must be in (0,1)");
    const int d = coef.dim();
    double quotient = 0.0;
    // Pairs straddling the unit cell and the origin defect copy, at dyadic
    // separations going down three decades.
    for (int scale = 2; scale <= 10; ++scale) {
        const double sep = std::ldexp(1.0, -scale);
        for (int k = 0; k < pairs_per_scale; ++k) {
            const auto h = halton_point(std::uint64_t(k), d);
            Point x{};
            for (int a = 0; a < d; ++a) x[std::size_t(a)] = 2.0 * h[std::size_t(a)] - 1.0;
            Point y = x;
            y[std::size_t(k % d)] += sep;
            double diff = 0.0;
            for (int i = 0; i < d; ++i) {
                const double dv = coef.eval_diag_entry(i, x) - coef.eval_diag_entry(i, y);
                diff = std::max(diff, std::abs(dv));
            }
            quotient = std::max(quotient, diff / std::pow(sep, alpha));
        }
    }
    return quotient;
}

double ellipticity_floor(const PerturbedCoefficient& coef, int samples_per_axis) {
    const int d = coef.dim();
    double floor_val = std::numeric_limits<double>::infinity();
    // Periodic part over the unit cell.
    long total = 1;
    for (int a = 0; a < d; ++a) total *= samples_per_axis;
    for (long it = 0; it < total; ++it) {
        long rest = it;
        Point y{};
        for (int a = 0; a < d; ++a) {
            const long ia = rest % samples_per_axis;
            rest /= samples_per_axis;
            y[std::size_t(a)] = (double(ia) + 0.5) / double(samples_per_axis);
        }
        floor_val = std::min(floor_val, coef.periodic().eval(y).min_eigenvalue());
    }
    // Defect supports shift the diagonal; sample the copies near the origin
    // and one far generation.
    if (coef.has_defects()) {
        const auto& set = coef.set();
        for (std::size_t i = 0; i < set.points().size(); ++i) {
            const int gen = geometry::max_norm(set.indices()[i]);
            if (gen > 3 && gen != set.index_bound()) continue;
            const double s = coef.profile()->support_radius(gen);
            for (int k = 0; k < samples_per_axis; ++k) {
                const double r = (double(k) + 0.5) / double(samples_per_axis) * s;
                Point y = set.points()[i];
                y[0] += r;  // radial slice is enough: the copy is radial
                SymMat a = coef.periodic().eval(y);
                const double tilde = coef.profile()->value(r, gen, d);
                for (int ax = 0; ax < d; ++ax) a.at(ax, ax) += tilde;
                floor_val = std::min(floor_val, a.min_eigenvalue());
            }
        }
    }
    return floor_val;
}

}  // namespace homlab::coefficients
