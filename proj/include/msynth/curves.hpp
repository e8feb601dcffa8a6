#pragma once

#include "msynth/geometry.hpp"
#include "msynth/random.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace msynth {

enum class CurveFamily { Circle, Ellipse, Line, Parabola, Lemniscate, Naca };

std::string_view to_string(CurveFamily family);
/// Accepts the canonical lowercase names plus "lb" for the lemniscate.
std::optional<CurveFamily> parse_family(std::string_view name);
const std::vector<CurveFamily>& all_families();

struct CircleParams {
    double r = 1.0, x1 = 0.0, y1 = 0.0;
    friend bool operator==(const CircleParams&, const CircleParams&) = default;
};
struct EllipseParams {
    double a = 1.0, b = 1.0, x1 = 0.0, y1 = 0.0;
    friend bool operator==(const EllipseParams&, const EllipseParams&) = default;
};
struct LineParams {
    double x1 = 0.0, y1 = 0.0, x2 = 1.0, y2 = 0.0;
    friend bool operator==(const LineParams&, const LineParams&) = default;
};
struct ParabolaParams {
    double a = 1.0, h = 0.0, k = 0.0;
    friend bool operator==(const ParabolaParams&, const ParabolaParams&) = default;
};
struct LemniscateParams {
    double a = 1.0;
    friend bool operator==(const LemniscateParams&, const LemniscateParams&) = default;
};
/// Four-digit code mpxx, chord 1 with the leading edge at the origin.
struct NacaParams {
    int series = 2412;
    friend bool operator==(const NacaParams&, const NacaParams&) = default;
};

using CurveParams =
    std::variant<CircleParams, EllipseParams, LineParams, ParabolaParams, LemniscateParams, NacaParams>;

struct CurveSpec {
    CurveParams params;

    CurveFamily family() const { return static_cast<CurveFamily>(params.index()); }
    friend bool operator==(const CurveSpec&, const CurveSpec&) = default;
};

/// Throws InvalidInput when a parameter violates its family's invariant.
void validate(const CurveSpec& curve);

/// Implicit-equation residual; zero on the curve. NACA returns the signed
/// distance to the nearer surface (positive outside the section).
double implicit_residual(const CurveSpec& curve, Point2 p);

enum class SamplingMode { Uniform, Random };

struct SamplingOptions {
    SamplingMode mode = SamplingMode::Uniform;
    /// Half-width of the x window used for parabolas.
    double parabola_half_width = 2.0;
};

/// Point on the curve at normalized parameter u ∈ [0, 1].
Point2 curve_point(const CurveSpec& curve, double u, const SamplingOptions& options = {});

Trajectory sample_points(const CurveSpec& curve, int n, std::uint64_t seed,
                         const SamplingOptions& options = {});

/// Dense uniform sampling of the whole curve, used as the scoring reference.
Trajectory reference_trajectory(const CurveSpec& curve, int n, const SamplingOptions& options = {});

std::string equation_text(const CurveSpec& curve);
/// Inverse of equation_text; nullopt when the text is not in canonical form.
std::optional<CurveSpec> parse_equation_text(std::string_view text);

/// One-sentence natural language task statement for prompts.
std::string describe(const CurveSpec& curve);

namespace naca {

struct Section {
    double max_camber = 0.0;    // m
    double camber_pos = 0.0;    // p
    double thickness = 0.0;     // t
};

Section decode(int series);
double thickness(double t, double x);
double camber(const Section& s, double x);
double camber_slope(const Section& s, double x);
Point2 upper(const Section& s, double x);
Point2 lower(const Section& s, double x);

}  // namespace naca

struct ParameterRanges {
    double radius_min = 0.5, radius_max = 5.0;
    double center_min = -5.0, center_max = 5.0;
    double parabola_a_min = 0.2, parabola_a_max = 3.0;
    double line_min_separation = 0.5;
    int naca_min = 2000, naca_max = 3000;
};

struct DatasetConfig {
    std::uint64_t seed = 0;
    std::vector<CurveFamily> families = all_families();
    int instances_per_family = 5;
    int n_points = 4;
    SamplingOptions sampling{SamplingMode::Random};
    ParameterRanges ranges{};
};

struct TaskInstance {
    std::string id;
    CurveSpec curve;
    Trajectory target_points;
    std::string equation_text;
    std::uint64_t seed = 0;
};

CurveSpec sample_curve(CurveFamily family, SplitMix64& rng, const ParameterRanges& ranges);

std::vector<TaskInstance> generate_dataset(const DatasetConfig& config);

std::string to_jsonl(const TaskInstance& task);
TaskInstance task_from_json(std::string_view line);
std::string dataset_to_jsonl(const std::vector<TaskInstance>& tasks);
std::vector<TaskInstance> read_dataset(const std::string& path);

}  // namespace msynth
