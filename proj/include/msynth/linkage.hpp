#pragma once

#include "msynth/geometry.hpp"

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace msynth {

/// A joint parent slot: either a previously declared joint (by name) or a
/// fixed anchor point in the ground frame.
using JointRef = std::variant<std::string, Point2>;

struct StaticJoint {
    Point2 position;
    friend bool operator==(const StaticJoint&, const StaticJoint&) = default;
};

/// Driven link rotating about `parent`: angle_step radians per simulation step.
struct CrankJoint {
    JointRef parent;
    double distance = 1.0;
    double angle_step = 0.1;
    std::optional<Point2> initial;
    friend bool operator==(const CrankJoint&, const CrankJoint&) = default;
};

/// Two-circle dyad: distance0 from parent0 and distance1 from parent1.
struct RevoluteJoint {
    JointRef parent0;
    double distance0 = 1.0;
    JointRef parent1;
    double distance1 = 1.0;
    std::optional<Point2> initial;
    friend bool operator==(const RevoluteJoint&, const RevoluteJoint&) = default;
};

/// Slider: revolute_radius from parent, constrained to the line through line_a, line_b.
struct LinearJoint {
    JointRef parent;
    double revolute_radius = 1.0;
    JointRef line_a;
    JointRef line_b;
    std::optional<Point2> initial;
    friend bool operator==(const LinearJoint&, const LinearJoint&) = default;
};

using JointKind = std::variant<StaticJoint, CrankJoint, RevoluteJoint, LinearJoint>;

struct Joint {
    std::string name;
    JointKind kind;
    friend bool operator==(const Joint&, const Joint&) = default;
};

inline constexpr const char* kTargetJointName = "target";

struct MechanismSpec {
    std::vector<Joint> joints;
    std::string target_name = kTargetJointName;

    const Joint* find(const std::string& name) const;
    friend bool operator==(const MechanismSpec&, const MechanismSpec&) = default;
};

enum class ValidationRule {
    NoJoints,
    DuplicateName,
    ForwardReference,
    UnknownReference,
    MissingTarget,
    TargetName,
    NoCrank,
    NonPositiveDistance,
    ZeroAngleStep,
    DegenerateLine,
    NonFinite,
};

struct ValidationError {
    ValidationRule rule;
    std::string joint;  // empty for whole-spec rules
    std::string message;
};

/// Every violated rule, in declaration order. Empty means valid.
std::vector<ValidationError> validate(const MechanismSpec& spec);

/// Joint positions indexed by declaration order.
using JointPositions = std::vector<Point2>;

struct StepFailure {
    int step = 0;
    std::string joint;
    std::string reason;
};

struct StepResult {
    JointPositions positions;
    std::optional<StepFailure> failure;

    bool ok() const { return !failure.has_value(); }
};

/// Slack applied before circle-circle or circle-line intersections are declared empty.
inline constexpr double kReachSlack = 1e-9;

/// Step-0 estimate for every joint: declared guesses where present, NaN
/// where the joint has no guess (branch then chosen by a fixed rule).
JointPositions initial_positions(const MechanismSpec& spec);

/// Solves all joints for `step_index`, choosing intersection branches nearest
/// to `previous`. Requires a valid spec.
StepResult solve_step(const MechanismSpec& spec, const JointPositions& previous, int step_index);

struct SimResult {
    Trajectory trajectory;
    std::map<std::string, Trajectory> per_joint_traces;
    int steps = 0;
    bool success = false;
    std::optional<StepFailure> failure;
};

/// One full revolution of the slowest crank: ceil(2π / min |angle_step|).
int default_steps(const MechanismSpec& spec);

/// Runs solve_step for `steps` steps (default_steps when steps <= 0).
/// Geometric infeasibility ends the run with `failure` set; never throws for it.
/// Throws InvalidInput when the spec does not validate.
SimResult simulate(const MechanismSpec& spec, int steps = 0);

/// Joint count.
int complexity(const MechanismSpec& spec);

}  // namespace msynth
