#include "msynth/linkage.hpp"

#include "msynth/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <unordered_map>

namespace msynth {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<const JointRef*> references(const JointKind& kind) {
    return std::visit(overloaded{
                          [](const StaticJoint&) { return std::vector<const JointRef*>{}; },
                          [](const CrankJoint& c) { return std::vector<const JointRef*>{&c.parent}; },
                          [](const RevoluteJoint& r) {
                              return std::vector<const JointRef*>{&r.parent0, &r.parent1};
                          },
                          [](const LinearJoint& l) {
                              return std::vector<const JointRef*>{&l.parent, &l.line_a, &l.line_b};
                          },
                      },
                      kind);
}

bool finite_opt(const std::optional<Point2>& p) { return !p || is_finite(*p); }

// A reference resolved against declaration order: index into positions, or a fixed point.
struct Slot {
    int index = -1;
    Point2 anchor{};

    Point2 get(const JointPositions& pos) const {
        return index >= 0 ? pos[static_cast<std::size_t>(index)] : anchor;
    }
};

Slot resolve(const JointRef& ref, const std::unordered_map<std::string, int>& names) {
    if (const auto* p = std::get_if<Point2>(&ref)) {
        return Slot{-1, *p};
    }
    return Slot{names.at(std::get<std::string>(ref)), {}};
}

double crank_phase(const CrankJoint& c, Point2 parent_estimate) {
    if (!c.initial || !is_finite(parent_estimate)) {
        return 0.0;
    }
    const Point2 d = *c.initial - parent_estimate;
    if (d.x == 0.0 && d.y == 0.0) {
        return 0.0;
    }
    return std::atan2(d.y, d.x);
}

Point2 pick_nearer(Point2 a, Point2 b, Point2 previous, bool prefer_first) {
    if (!is_finite(previous)) {
        return prefer_first ? a : b;
    }
    const double da = squared_norm(a - previous);
    const double db = squared_norm(b - previous);
    if (da == db) {
        return prefer_first ? a : b;
    }
    return da < db ? a : b;
}

std::string unreachable(int step, const std::string& joint, const std::string& detail) {
    return "unreachable configuration at step " + std::to_string(step) + ", joint " + joint + " (" + detail +
           ")";
}

}  // namespace

const Joint* MechanismSpec::find(const std::string& name) const {
    for (const Joint& j : joints) {
        if (j.name == name) {
            return &j;
        }
    }
    return nullptr;
}

std::vector<ValidationError> validate(const MechanismSpec& spec) {
    std::vector<ValidationError> errors;
    if (spec.joints.empty()) {
        errors.push_back({ValidationRule::NoJoints, "", "no joints declared"});
    }
    if (spec.target_name != kTargetJointName) {
        errors.push_back({ValidationRule::TargetName, spec.target_name,
                          "target joint must be named \"target\", got \"" + spec.target_name + "\""});
    }

    std::set<std::string> all_names;
    for (const Joint& j : spec.joints) {
        all_names.insert(j.name);
    }

    std::set<std::string> declared;
    bool has_crank = false;
    for (const Joint& j : spec.joints) {
        if (declared.count(j.name)) {
            errors.push_back({ValidationRule::DuplicateName, j.name, "duplicate joint name '" + j.name + "'"});
        }
        for (const JointRef* ref : references(j.kind)) {
            if (const auto* name = std::get_if<std::string>(ref)) {
                if (declared.count(*name)) {
                    continue;
                }
                if (all_names.count(*name)) {
                    errors.push_back({ValidationRule::ForwardReference, j.name,
                                      "forward reference: joint '" + j.name + "' uses '" + *name +
                                          "' before it is declared"});
                } else {
                    errors.push_back({ValidationRule::UnknownReference, j.name,
                                      "unknown joint '" + *name + "' referenced by '" + j.name + "'"});
                }
            } else if (!is_finite(std::get<Point2>(*ref))) {
                errors.push_back({ValidationRule::NonFinite, j.name, "non-finite anchor in '" + j.name + "'"});
            }
        }
        auto positive = [&](double v, const char* what) {
            if (!std::isfinite(v)) {
                errors.push_back({ValidationRule::NonFinite, j.name,
                                  std::string("non-finite ") + what + " in '" + j.name + "'"});
            } else if (!(v > 0.0)) {
                errors.push_back({ValidationRule::NonPositiveDistance, j.name,
                                  std::string(what) + " must be positive in '" + j.name + "'"});
            }
        };
        auto guess = [&](const std::optional<Point2>& p) {
            if (!finite_opt(p)) {
                errors.push_back({ValidationRule::NonFinite, j.name, "non-finite position in '" + j.name + "'"});
            }
        };
        std::visit(overloaded{
                       [&](const StaticJoint& s) { guess(s.position); },
                       [&](const CrankJoint& c) {
                           has_crank = true;
                           positive(c.distance, "distance");
                           if (!std::isfinite(c.angle_step)) {
                               errors.push_back({ValidationRule::NonFinite, j.name,
                                                 "non-finite angle in '" + j.name + "'"});
                           } else if (c.angle_step == 0.0) {
                               errors.push_back({ValidationRule::ZeroAngleStep, j.name,
                                                 "crank '" + j.name + "' has zero angle step"});
                           }
                           guess(c.initial);
                       },
                       [&](const RevoluteJoint& r) {
                           positive(r.distance0, "distance0");
                           positive(r.distance1, "distance1");
                           guess(r.initial);
                       },
                       [&](const LinearJoint& l) {
                           positive(l.revolute_radius, "revolute_radius");
                           if (l.line_a == l.line_b) {
                               errors.push_back({ValidationRule::DegenerateLine, j.name,
                                                 "slider '" + j.name + "' line needs two distinct references"});
                           }
                           guess(l.initial);
                       },
                   },
                   j.kind);
        declared.insert(j.name);
    }
    if (!spec.joints.empty() && !spec.find(kTargetJointName)) {
        errors.push_back({ValidationRule::MissingTarget, "", "missing target joint (no joint named \"target\")"});
    }
    if (!spec.joints.empty() && !has_crank) {
        errors.push_back({ValidationRule::NoCrank, "", "no crank: the mechanism is not actuated"});
    }
    return errors;
}

JointPositions initial_positions(const MechanismSpec& spec) {
    std::unordered_map<std::string, int> names;
    JointPositions est;
    est.reserve(spec.joints.size());
    for (const Joint& j : spec.joints) {
        const Point2 p = std::visit(
            overloaded{
                [](const StaticJoint& s) { return s.position; },
                [&](const CrankJoint& c) {
                    if (c.initial) {
                        return *c.initial;
                    }
                    return Point2{kNaN, kNaN};
                },
                [](const RevoluteJoint& r) { return r.initial.value_or(Point2{kNaN, kNaN}); },
                [](const LinearJoint& l) { return l.initial.value_or(Point2{kNaN, kNaN}); },
            },
            j.kind);
        names.emplace(j.name, static_cast<int>(est.size()));
        est.push_back(p);
    }
    return est;
}

namespace {

// Phase offsets need the parents' step-0 estimates, which are only finite for
// joints with declared positions or literal anchors.
std::vector<double> crank_phases(const MechanismSpec& spec, const JointPositions& est,
                                 const std::unordered_map<std::string, int>& names) {
    std::vector<double> phases(spec.joints.size(), 0.0);
    for (std::size_t i = 0; i < spec.joints.size(); ++i) {
        if (const auto* c = std::get_if<CrankJoint>(&spec.joints[i].kind)) {
            phases[i] = crank_phase(*c, resolve(c->parent, names).get(est));
        }
    }
    return phases;
}

StepResult solve_with(const MechanismSpec& spec, const JointPositions& previous, int step,
                      const std::unordered_map<std::string, int>& names, const std::vector<double>& phases) {
    StepResult out;
    out.positions.resize(spec.joints.size());
    JointPositions& pos = out.positions;

    for (std::size_t i = 0; i < spec.joints.size(); ++i) {
        const Joint& joint = spec.joints[i];
        const Point2 prev = i < previous.size() ? previous[i] : Point2{kNaN, kNaN};
        std::optional<std::string> fail;
        std::visit(
            overloaded{
                [&](const StaticJoint& s) { pos[i] = s.position; },
                [&](const CrankJoint& c) {
                    const Point2 center = resolve(c.parent, names).get(pos);
                    const double phi = phases[i] + static_cast<double>(step) * c.angle_step;
                    pos[i] = {center.x + c.distance * std::cos(phi), center.y + c.distance * std::sin(phi)};
                },
                [&](const RevoluteJoint& r) {
                    const Point2 p0 = resolve(r.parent0, names).get(pos);
                    const Point2 p1 = resolve(r.parent1, names).get(pos);
                    const Point2 delta = p1 - p0;
                    const double sep = norm(delta);
                    if (sep <= 1e-15) {
                        fail = unreachable(step, joint.name, "coincident parents");
                        return;
                    }
                    if (sep > r.distance0 + r.distance1 + kReachSlack) {
                        fail = unreachable(step, joint.name, "circles are disjoint");
                        return;
                    }
                    if (sep < std::abs(r.distance0 - r.distance1) - kReachSlack) {
                        fail = unreachable(step, joint.name, "one circle contains the other");
                        return;
                    }
                    const Point2 u = (1.0 / sep) * delta;
                    const double a = (r.distance0 * r.distance0 - r.distance1 * r.distance1 + sep * sep) / (2.0 * sep);
                    const double h = std::sqrt(std::max(0.0, r.distance0 * r.distance0 - a * a));
                    const Point2 base = p0 + a * u;
                    const Point2 perp{-u.y, u.x};
                    pos[i] = pick_nearer(base + h * perp, base - h * perp, prev, true);
                },
                [&](const LinearJoint& l) {
                    const Point2 center = resolve(l.parent, names).get(pos);
                    const Point2 a = resolve(l.line_a, names).get(pos);
                    const Point2 b = resolve(l.line_b, names).get(pos);
                    const double len = norm(b - a);
                    if (len <= 1e-15) {
                        fail = unreachable(step, joint.name, "slider line endpoints coincide");
                        return;
                    }
                    const Point2 u = (1.0 / len) * (b - a);
                    const double t0 = dot(center - a, u);
                    const Point2 foot = a + t0 * u;
                    const double off = std::abs(cross(u, center - a));
                    if (off > l.revolute_radius + kReachSlack) {
                        fail = unreachable(step, joint.name, "circle misses the slider line");
                        return;
                    }
                    const double s = std::sqrt(std::max(0.0, l.revolute_radius * l.revolute_radius - off * off));
                    pos[i] = pick_nearer(foot + s * u, foot - s * u, prev, true);
                },
            },
            joint.kind);
        if (fail) {
            out.failure = StepFailure{step, joint.name, *fail};
            pos.resize(i);
            return out;
        }
    }
    return out;
}

std::unordered_map<std::string, int> name_index(const MechanismSpec& spec) {
    std::unordered_map<std::string, int> names;
    for (std::size_t i = 0; i < spec.joints.size(); ++i) {
        names.emplace(spec.joints[i].name, static_cast<int>(i));
    }
    return names;
}

}  // namespace

StepResult solve_step(const MechanismSpec& spec, const JointPositions& previous, int step_index) {
    const auto names = name_index(spec);
    const JointPositions est = initial_positions(spec);
    return solve_with(spec, previous, step_index, names, crank_phases(spec, est, names));
}

int default_steps(const MechanismSpec& spec) {
    double slowest = std::numeric_limits<double>::infinity();
    for (const Joint& j : spec.joints) {
        if (const auto* c = std::get_if<CrankJoint>(&j.kind)) {
            if (c->angle_step != 0.0) {
                slowest = std::min(slowest, std::abs(c->angle_step));
            }
        }
    }
    if (!std::isfinite(slowest)) {
        return 1;
    }
    const double steps = std::ceil(2.0 * std::numbers::pi / slowest);
    // Cap absurdly slow cranks so a malformed candidate cannot stall a run.
    return static_cast<int>(std::min(steps, 100000.0));
}

SimResult simulate(const MechanismSpec& spec, int steps) {
    const auto errors = validate(spec);
    if (!errors.empty()) {
        throw InvalidInput("simulate: invalid mechanism: " + errors.front().message);
    }
    if (steps <= 0) {
        steps = default_steps(spec);
    }
    const auto names = name_index(spec);
    JointPositions previous = initial_positions(spec);
    const std::vector<double> phases = crank_phases(spec, previous, names);

    SimResult result;
    std::vector<Trajectory> traces(spec.joints.size());
    for (auto& t : traces) {
        t.points.reserve(static_cast<std::size_t>(steps));
    }
    result.success = true;
    for (int k = 0; k < steps; ++k) {
        StepResult step = solve_with(spec, previous, k, names, phases);
        if (!step.ok()) {
            result.success = false;
            result.failure = step.failure;
            break;
        }
        for (std::size_t i = 0; i < traces.size(); ++i) {
            traces[i].points.push_back(step.positions[i]);
        }
        previous = std::move(step.positions);
        ++result.steps;
    }
    const int target = names.at(spec.target_name);
    for (std::size_t i = 0; i < traces.size(); ++i) {
        Trajectory& t = traces[i];
        if (result.success && t.size() >= 2) {
            double max_step = 0.0;
            for (std::size_t s = 1; s < t.size(); ++s) {
                max_step = std::max(max_step, norm(t.points[s] - t.points[s - 1]));
            }
            t.closed = norm(t.points.back() - t.points.front()) <= 2.0 * max_step + 1e-12;
        }
        result.per_joint_traces.emplace(spec.joints[i].name, t);
    }
    result.trajectory = traces[static_cast<std::size_t>(target)];
    return result;
}

int complexity(const MechanismSpec& spec) { return static_cast<int>(spec.joints.size()); }

}  // namespace msynth
