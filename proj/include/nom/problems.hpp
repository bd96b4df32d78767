#pragma once

#include "nom/field.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nom {

enum class ConstraintKind {
    inequality, ///< g(x) <= 0
    equality,   ///< h(x) == 0
};

struct ConstraintSpec {
    ConstraintKind kind = ConstraintKind::inequality;
    FieldPtr expr;
    std::string name;

    /// max(0, g(x)) for inequalities, |h(x)| for equalities.
    double violation(std::span<const double> x) const;
};

ConstraintSpec inequality(FieldPtr expr, std::string name = {});
ConstraintSpec equality(FieldPtr expr, std::string name = {});

struct Box {
    std::vector<double> lo, hi;

    Box() = default;
    Box(std::vector<double> lo_, std::vector<double> hi_);

    std::size_t dim() const { return lo.size(); }
    double width(std::size_t i) const { return hi[i] - lo[i]; }
    double diagonal() const;
    bool contains(std::span<const double> x, double tol = 0.0) const;
    std::vector<double> clamp(std::span<const double> x) const;
    /// Throws Error if any lo >= hi or a bound is non-finite.
    void validate() const;

    friend bool operator==(const Box&, const Box&) = default;
};

/// Two inequality constraints per variable: lo - x_i <= 0 and x_i - hi <= 0.
std::vector<ConstraintSpec> box_constraints(const Box& box);

struct ReferenceOptimum {
    std::vector<double> x;
    double f = 0.0;
    std::string provenance; ///< "published" or "grid-search"
};

struct ProblemSpec {
    std::string name;
    std::size_t dim = 0;
    std::vector<FieldPtr> objectives;
    std::vector<std::string> objective_names;
    /// General constraints; the box is kept separately.
    std::vector<ConstraintSpec> constraints;
    Box box;
    std::optional<ReferenceOptimum> reference;
    /// Extra known local minima (objective 0), when recorded.
    std::vector<ReferenceOptimum> known_minima;
};

/// Registry lookup; throws Error for an unknown name.
ProblemSpec get_problem(std::string_view name);
std::vector<std::string> problem_names();

double eval_objective(const ProblemSpec& p, std::size_t index, std::span<const double> x);
/// Raw constraint values g(x) / h(x), in declaration order.
std::vector<double> eval_constraints(const ProblemSpec& p, std::span<const double> x);
std::vector<double> constraint_violations(std::span<const ConstraintSpec> constraints,
                                          std::span<const double> x);
/// All g <= tol, all |h| <= tol and x inside the box widened by tol.
bool feasible(const ProblemSpec& p, std::span<const double> x, double tol);

/// Problem from a declarative description:
///   { "name": "...", "box": [[lo, hi], ...],
///     "objectives": ["expr", ...],
///     "constraints": [{"kind": "inequality" | "equality", "expr": "..."}, ...],
///     "reference": {"x": [...], "f": v} }     (reference optional)
ProblemSpec problem_from_json(const nlohmann::json& j);
ProblemSpec load_problem_file(const std::string& path);

} // namespace nom
