#include "msynth/geometry.hpp"

#include "msynth/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace msynth {

double norm(Point2 p) { return std::hypot(p.x, p.y); }

bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

RigidTransform2 RigidTransform2::from_angle(double radians, Point2 translation) {
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    RigidTransform2 t;
    t.rotation = {c, -s, s, c};
    t.translation = translation;
    return t;
}

double RigidTransform2::angle() const { return std::atan2(rotation[2], rotation[0]); }

RigidTransform2 RigidTransform2::inverse() const {
    RigidTransform2 inv;
    inv.rotation = {rotation[0], rotation[2], rotation[1], rotation[3]};
    const Point2 rt = inv.apply(translation);  // inv.translation is still zero here
    inv.translation = {-rt.x, -rt.y};
    return inv;
}

RigidTransform2 RigidTransform2::compose(const RigidTransform2& other) const {
    const auto& a = rotation;
    const auto& b = other.rotation;
    RigidTransform2 out;
    out.rotation = {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
                    a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
    out.translation = apply(other.translation);
    return out;
}

bool RigidTransform2::is_valid() const {
    const auto& r = rotation;
    for (double v : r) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    if (!is_finite(translation)) {
        return false;
    }
    const double c00 = r[0] * r[0] + r[2] * r[2];
    const double c01 = r[0] * r[1] + r[2] * r[3];
    const double c11 = r[1] * r[1] + r[3] * r[3];
    const double det = r[0] * r[3] - r[1] * r[2];
    constexpr double eps = 1e-12;
    return std::abs(c00 - 1.0) <= eps && std::abs(c11 - 1.0) <= eps && std::abs(c01) <= eps &&
           std::abs(det - 1.0) <= eps;
}

void require_finite_nonempty(std::span<const Point2> points, const char* what) {
    if (points.empty()) {
        throw InvalidInput(std::string(what) + ": empty point set");
    }
    for (const Point2& p : points) {
        if (!is_finite(p)) {
            throw InvalidInput(std::string(what) + ": non-finite coordinate");
        }
    }
}

// ---------------------------------------------------------------------------
// Nearest neighbour

NearestNeighbor::NearestNeighbor(std::span<const Point2> reference)
    : reference_(reference.begin(), reference.end()) {
    if (reference_.size() <= kGridThreshold) {
        return;
    }
    use_grid_ = true;
    double max_x = reference_[0].x, max_y = reference_[0].y;
    min_x_ = max_x;
    min_y_ = max_y;
    for (const Point2& p : reference_) {
        min_x_ = std::min(min_x_, p.x);
        min_y_ = std::min(min_y_, p.y);
        max_x = std::max(max_x, p.x);
        max_y = std::max(max_y, p.y);
    }
    const double w = std::max(max_x - min_x_, 1e-12);
    const double h = std::max(max_y - min_y_, 1e-12);
    // Roughly two points per cell.
    const double target_cells = static_cast<double>(reference_.size()) / 2.0;
    cell_ = std::sqrt(w * h / target_cells);
    if (!(cell_ > 0.0) || !std::isfinite(cell_)) {
        cell_ = std::max(w, h) / std::sqrt(target_cells);
    }
    cols_ = std::max(1L, static_cast<long>(std::ceil(w / cell_)) + 1);
    rows_ = std::max(1L, static_cast<long>(std::ceil(h / cell_)) + 1);
    cells_.assign(static_cast<std::size_t>(cols_ * rows_), {});
    for (std::size_t i = 0; i < reference_.size(); ++i) {
        const long cx = std::clamp(static_cast<long>((reference_[i].x - min_x_) / cell_), 0L, cols_ - 1);
        const long cy = std::clamp(static_cast<long>((reference_[i].y - min_y_) / cell_), 0L, rows_ - 1);
        cells_[static_cast<std::size_t>(cy * cols_ + cx)].push_back(i);
    }
}

std::size_t NearestNeighbor::nearest_brute(Point2 query) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < reference_.size(); ++i) {
        const double d = squared_norm(reference_[i] - query);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::size_t NearestNeighbor::nearest(Point2 query) const {
    if (!use_grid_) {
        return nearest_brute(query);
    }
    const long qx = static_cast<long>(std::floor((query.x - min_x_) / cell_));
    const long qy = static_cast<long>(std::floor((query.y - min_y_) / cell_));
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    const long max_ring = std::max(cols_, rows_) + std::max(std::abs(qx), std::abs(qy)) + 1;
    for (long ring = 0; ring <= max_ring; ++ring) {
        // Any point in ring r is at least (r - 1) * cell away from the query.
        if (ring > 0 && std::isfinite(best_d)) {
            const double gap = static_cast<double>(ring - 1) * cell_;
            if (gap * gap > best_d) {
                break;
            }
        }
        for (long cy = qy - ring; cy <= qy + ring; ++cy) {
            if (cy < 0 || cy >= rows_) {
                continue;
            }
            for (long cx = qx - ring; cx <= qx + ring; ++cx) {
                if (cx < 0 || cx >= cols_) {
                    continue;
                }
                if (std::max(std::abs(cx - qx), std::abs(cy - qy)) != ring) {
                    continue;
                }
                for (std::size_t i : cells_[static_cast<std::size_t>(cy * cols_ + cx)]) {
                    const double d = squared_norm(reference_[i] - query);
                    if (d < best_d || (d == best_d && i < best)) {
                        best_d = d;
                        best = i;
                    }
                }
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Chamfer

namespace {

double mean_nearest_squared(std::span<const Point2> from, std::span<const Point2> to) {
    const NearestNeighbor index(to);
    double sum = 0.0;
    for (const Point2& p : from) {
        sum += squared_norm(p - to[index.nearest(p)]);
    }
    return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance(std::span<const Point2> p, std::span<const Point2> q) {
    require_finite_nonempty(p, "chamfer_distance");
    require_finite_nonempty(q, "chamfer_distance");
    return mean_nearest_squared(p, q) + mean_nearest_squared(q, p);
}

double chamfer_distance(const Trajectory& p, const Trajectory& q) {
    return chamfer_distance(std::span<const Point2>(p.points), std::span<const Point2>(q.points));
}

Trajectory apply_transform(const RigidTransform2& transform, const Trajectory& trajectory) {
    Trajectory out;
    out.closed = trajectory.closed;
    out.points.reserve(trajectory.size());
    for (const Point2& p : trajectory.points) {
        out.points.push_back(transform.apply(p));
    }
    return out;
}

Point2 centroid(std::span<const Point2> points) {
    Point2 c{};
    for (const Point2& p : points) {
        c = c + p;
    }
    const double n = static_cast<double>(points.size());
    return {c.x / n, c.y / n};
}

RigidTransform2 fit_rigid(std::span<const Point2> from, std::span<const Point2> to) {
    if (from.size() != to.size() || from.empty()) {
        throw InvalidInput("fit_rigid: point sets must be non-empty and equally sized");
    }
    const Point2 cf = centroid(from);
    const Point2 ct = centroid(to);
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < from.size(); ++i) {
        const Point2 a = from[i] - cf;
        const Point2 b = to[i] - ct;
        cov(0, 0) += a.x * b.x;
        cov(0, 1) += a.x * b.y;
        cov(1, 0) += a.y * b.x;
        cov(1, 1) += a.y * b.y;
    }
    const Eigen::JacobiSVD<Eigen::Matrix2d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix2d& u = svd.matrixU();
    const Eigen::Matrix2d& v = svd.matrixV();
    Eigen::Matrix2d correction = Eigen::Matrix2d::Identity();
    if ((v * u.transpose()).determinant() < 0.0) {
        correction(1, 1) = -1.0;
    }
    Eigen::Matrix2d r = v * correction * u.transpose();

    // Re-orthonormalize through the angle so the invariant holds to rounding.
    const double theta = std::atan2(r(1, 0), r(0, 0));
    RigidTransform2 out = RigidTransform2::from_angle(theta);
    const Point2 rc = out.apply(cf);
    out.translation = ct - rc;
    return out;
}

// ---------------------------------------------------------------------------
// ICP

namespace {

std::size_t count_distinct_up_to(std::span<const Point2> points, std::size_t limit) {
    std::vector<Point2> seen;
    for (const Point2& p : points) {
        bool fresh = true;
        for (const Point2& s : seen) {
            if (std::abs(p.x - s.x) <= 1e-12 && std::abs(p.y - s.y) <= 1e-12) {
                fresh = false;
                break;
            }
        }
        if (fresh) {
            seen.push_back(p);
            if (seen.size() >= limit) {
                break;
            }
        }
    }
    return seen.size();
}

double correspond(const NearestNeighbor& index, std::span<const Point2> target,
                  std::span<const Point2> current, std::vector<Point2>& matched) {
    matched.resize(current.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < current.size(); ++i) {
        matched[i] = target[index.nearest(current[i])];
        sum += squared_norm(current[i] - matched[i]);
    }
    return sum / static_cast<double>(current.size());
}

}  // namespace

IcpResult icp_align(const Trajectory& source, const Trajectory& target, IcpOptions options) {
    require_finite_nonempty(source.points, "icp_align source");
    require_finite_nonempty(target.points, "icp_align target");
    if (source.size() < 3 || target.size() < 3) {
        throw InvalidInput("icp_align: both point sets need at least 3 points");
    }
    if (options.max_iters < 1 || !(options.tol > 0.0)) {
        throw InvalidInput("icp_align: max_iters must be positive and tol > 0");
    }
    if (count_distinct_up_to(source.points, 3) < 3) {
        throw DegenerateGeometry("icp_align: source has fewer than 3 distinct points");
    }

    const NearestNeighbor index(target.points);
    const std::span<const Point2> target_pts(target.points);

    IcpResult result;
    result.transform.translation = centroid(target.points) - centroid(source.points);
    std::vector<Point2> current = apply_transform(result.transform, source).points;
    std::vector<Point2> matched;
    double objective = correspond(index, target_pts, current, matched);
    result.objective_history.push_back(objective);

    std::vector<Point2> candidate(current.size());
    std::vector<Point2> candidate_matched;
    for (int it = 0; it < options.max_iters; ++it) {
        const RigidTransform2 step = fit_rigid(current, matched);
        for (std::size_t i = 0; i < current.size(); ++i) {
            candidate[i] = step.apply(current[i]);
        }
        const double next = correspond(index, target_pts, candidate, candidate_matched);
        if (next > objective) {
            break;  // rounding noise at the optimum; keep the last accepted pose
        }
        result.transform = step.compose(result.transform);
        current.swap(candidate);
        matched.swap(candidate_matched);
        result.objective_history.push_back(next);
        ++result.iterations;
        const double improvement = objective - next;
        objective = next;
        if (improvement < options.tol) {
            break;
        }
    }

    // Recompute from the composed transform so `aligned` is exactly T(source).
    result.aligned = apply_transform(result.transform, source);
    result.final_chamfer = chamfer_distance(result.aligned, target);
    return result;
}

}  // namespace msynth
