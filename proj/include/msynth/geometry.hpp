#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace msynth {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double squared_norm(Point2 p) { return dot(p, p); }
double norm(Point2 p);
bool is_finite(Point2 p);

/// Ordered 2D point sequence. Non-empty and finite whenever it enters a
/// scoring path; the checks live in the functions that consume it.
struct Trajectory {
    std::vector<Point2> points;
    bool closed = false;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// p -> R p + t with R a proper rotation.
struct RigidTransform2 {
    std::array<double, 4> rotation{1.0, 0.0, 0.0, 1.0};  // row-major
    Point2 translation{};

    static RigidTransform2 identity() { return {}; }
    static RigidTransform2 from_angle(double radians, Point2 translation = {});

    Point2 apply(Point2 p) const {
        return {rotation[0] * p.x + rotation[1] * p.y + translation.x,
                rotation[2] * p.x + rotation[3] * p.y + translation.y};
    }
    double angle() const;
    RigidTransform2 inverse() const;
    /// (this ∘ other)(p) = this(other(p))
    RigidTransform2 compose(const RigidTransform2& other) const;
    /// RᵀR = I and det R = +1 within 1e-12.
    bool is_valid() const;
};

/// Throws InvalidInput on an empty set or a non-finite coordinate.
void require_finite_nonempty(std::span<const Point2> points, const char* what);

/// Bidirectional Chamfer distance with squared Euclidean terms, each sum
/// normalized by its own set size.
double chamfer_distance(std::span<const Point2> p, std::span<const Point2> q);
double chamfer_distance(const Trajectory& p, const Trajectory& q);

Trajectory apply_transform(const RigidTransform2& transform, const Trajectory& trajectory);

Point2 centroid(std::span<const Point2> points);

/// Least-squares proper rotation + translation mapping `from[i]` onto `to[i]`.
/// Reflections are excluded by a determinant correction on the SVD.
RigidTransform2 fit_rigid(std::span<const Point2> from, std::span<const Point2> to);

struct IcpOptions {
    int max_iters = 100;
    double tol = 1e-9;
};

struct IcpResult {
    RigidTransform2 transform;
    Trajectory aligned;
    double final_chamfer = 0.0;
    /// Mean squared nearest-neighbour error observed at each correspondence step.
    std::vector<double> objective_history;
    int iterations = 0;
};

/// Point-to-point ICP of `source` onto `target`, seeded by centroid alignment.
/// Throws InvalidInput for sets with fewer than three points and
/// DegenerateGeometry when the source has fewer than three distinct points.
IcpResult icp_align(const Trajectory& source, const Trajectory& target, IcpOptions options = {});

/// Index of the nearest point in a fixed reference set. Brute force for small
/// sets, uniform grid buckets above `kGridThreshold` points.
class NearestNeighbor {
public:
    static constexpr std::size_t kGridThreshold = 1000;

    explicit NearestNeighbor(std::span<const Point2> reference);

    std::size_t nearest(Point2 query) const;

private:
    std::size_t nearest_brute(Point2 query) const;

    std::vector<Point2> reference_;
    bool use_grid_ = false;
    double min_x_ = 0.0, min_y_ = 0.0, cell_ = 1.0;
    long cols_ = 1, rows_ = 1;
    std::vector<std::vector<std::size_t>> cells_;
};

}  // namespace msynth
