#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fuzzydose/errors.hpp"
#include "fuzzydose/membership.hpp"

namespace fuzzydose {

struct UniverseInterval {
    double lo = 0.0;
    double hi = 1.0;
    double resolution = 0.001;

    UniverseInterval() = default;

    UniverseInterval(double lo_in, double hi_in, double resolution_in)
        : lo(lo_in), hi(hi_in), resolution(resolution_in) {
        if (!std::isfinite(lo) || !std::isfinite(hi) || !std::isfinite(resolution)) {
            throw DefinitionError("universe bounds and resolution must be finite");
        }
        if (!(lo < hi)) {
            throw DefinitionError("universe requires lo < hi");
        }
        if (!(resolution > 0.0)) {
            throw DefinitionError("universe resolution must be positive");
        }
        if (sample_count() < 11) {
            throw DefinitionError("universe must span at least ten resolution steps");
        }
    }

    // Grid index count: floor((hi - lo) / resolution) + 1.  The small epsilon keeps
    // exact spans such as 14 / 0.01 from losing a sample to rounding.
    std::size_t sample_count() const {
        return static_cast<std::size_t>(std::floor((hi - lo) / resolution + 1e-9)) + 1;
    }

    double sample_at(std::size_t i) const { return lo + static_cast<double>(i) * resolution; }

    bool contains(double x) const { return x >= lo && x <= hi; }

    double clamp(double x) const { return std::min(hi, std::max(lo, x)); }

    friend bool operator==(const UniverseInterval&, const UniverseInterval&) = default;
};

enum class VariableKind { input, output };

class LinguisticVariable {
  public:
    LinguisticVariable(std::string name, VariableKind kind, UniverseInterval universe)
        : name_(std::move(name)), kind_(kind), universe_(universe) {
        if (name_.empty()) {
            throw DefinitionError("variable name must not be empty");
        }
    }

    LinguisticVariable& add_term(std::string term_name, PiecewiseLinearMf mf) {
        if (term_name.empty()) {
            throw DefinitionError("term name must not be empty");
        }
        if (find_term(term_name) != nullptr) {
            throw DefinitionError("duplicate term '" + term_name + "' on variable '" + name_ +
                                  "'");
        }
        if (mf.support_lo() < universe_.lo || mf.support_hi() > universe_.hi) {
            throw DefinitionError("term '" + term_name + "' on variable '" + name_ +
                                  "' has breakpoints outside the universe");
        }
        terms_.emplace_back(std::move(term_name), std::move(mf));
        return *this;
    }

    const std::string& name() const { return name_; }
    VariableKind kind() const { return kind_; }
    const UniverseInterval& universe() const { return universe_; }

    const std::vector<std::pair<std::string, PiecewiseLinearMf>>& terms() const {
        return terms_;
    }

    const PiecewiseLinearMf* find_term(std::string_view term_name) const {
        for (const auto& [name, mf] : terms_) {
            if (name == term_name) {
                return &mf;
            }
        }
        return nullptr;
    }

    std::optional<std::size_t> term_index(std::string_view term_name) const {
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            if (terms_[i].first == term_name) {
                return i;
            }
        }
        return std::nullopt;
    }

  private:
    std::string name_;
    VariableKind kind_;
    UniverseInterval universe_;
    std::vector<std::pair<std::string, PiecewiseLinearMf>> terms_;
};

struct RuleClause {
    std::string variable;
    std::string term;

    friend bool operator==(const RuleClause&, const RuleClause&) = default;
};

struct Rule {
    std::vector<RuleClause> antecedent;
    std::vector<RuleClause> consequent;

    friend bool operator==(const Rule&, const Rule&) = default;
};

class FisDefinition {
  public:
    FisDefinition(std::vector<LinguisticVariable> variables, std::vector<Rule> rules)
        : variables_(std::move(variables)), rules_(std::move(rules)) {
        validate_structure();
    }

    const std::vector<LinguisticVariable>& variables() const { return variables_; }
    const std::vector<Rule>& rules() const { return rules_; }

    const LinguisticVariable* find_variable(std::string_view name) const {
        for (const LinguisticVariable& v : variables_) {
            if (v.name() == name) {
                return &v;
            }
        }
        return nullptr;
    }

    std::vector<const LinguisticVariable*> inputs() const {
        return filtered(VariableKind::input);
    }

    std::vector<const LinguisticVariable*> outputs() const {
        return filtered(VariableKind::output);
    }

    // Structural equality: variables compare as a name-keyed set (kind, universe,
    // term set by name with exact breakpoints); rules compare in order.
    friend bool operator==(const FisDefinition& a, const FisDefinition& b) {
        if (a.variables_.size() != b.variables_.size() || a.rules_ != b.rules_) {
            return false;
        }
        for (const LinguisticVariable& va : a.variables_) {
            const LinguisticVariable* vb = b.find_variable(va.name());
            if (vb == nullptr || va.kind() != vb->kind() || va.universe() != vb->universe() ||
                va.terms().size() != vb->terms().size()) {
                return false;
            }
            for (const auto& [term_name, mf] : va.terms()) {
                const PiecewiseLinearMf* other = vb->find_term(term_name);
                if (other == nullptr || !(mf == *other)) {
                    return false;
                }
            }
        }
        return true;
    }

  private:
    std::vector<const LinguisticVariable*> filtered(VariableKind kind) const {
        std::vector<const LinguisticVariable*> out;
        for (const LinguisticVariable& v : variables_) {
            if (v.kind() == kind) {
                out.push_back(&v);
            }
        }
        return out;
    }

    void validate_structure() const {
        if (variables_.empty()) {
            throw DefinitionError("definition has no variables");
        }
        for (std::size_t i = 0; i < variables_.size(); ++i) {
            if (variables_[i].terms().empty()) {
                throw DefinitionError("variable '" + variables_[i].name() + "' has no terms");
            }
            for (std::size_t j = i + 1; j < variables_.size(); ++j) {
                if (variables_[i].name() == variables_[j].name()) {
                    throw DefinitionError("duplicate variable '" + variables_[i].name() + "'");
                }
            }
        }
        for (std::size_t r = 0; r < rules_.size(); ++r) {
            const Rule& rule = rules_[r];
            if (rule.antecedent.empty()) {
                throw DefinitionError("rule " + std::to_string(r) + " has an empty antecedent");
            }
            if (rule.consequent.empty()) {
                throw DefinitionError("rule " + std::to_string(r) + " has an empty consequent");
            }
            std::vector<std::string_view> seen;
            for (const RuleClause& clause : rule.antecedent) {
                check_clause(clause, VariableKind::input, r);
                if (std::find(seen.begin(), seen.end(), clause.variable) != seen.end()) {
                    throw DefinitionError("rule " + std::to_string(r) +
                                          " repeats antecedent variable '" + clause.variable +
                                          "'");
                }
                seen.push_back(clause.variable);
            }
            seen.clear();
            for (const RuleClause& clause : rule.consequent) {
                check_clause(clause, VariableKind::output, r);
                if (std::find(seen.begin(), seen.end(), clause.variable) != seen.end()) {
                    throw DefinitionError("rule " + std::to_string(r) +
                                          " repeats consequent variable '" + clause.variable +
                                          "'");
                }
                seen.push_back(clause.variable);
            }
        }
    }

    void check_clause(const RuleClause& clause, VariableKind expected, std::size_t rule_index)
        const {
        const LinguisticVariable* var = find_variable(clause.variable);
        if (var == nullptr) {
            throw DefinitionError("rule " + std::to_string(rule_index) +
                                  " references undeclared variable '" + clause.variable + "'");
        }
        if (var->kind() != expected) {
            throw DefinitionError(
                "rule " + std::to_string(rule_index) + " uses variable '" + clause.variable +
                (expected == VariableKind::input ? "' in an antecedent but it is an output"
                                                 : "' in a consequent but it is an input"));
        }
        if (var->find_term(clause.term) == nullptr) {
            throw DefinitionError("rule " + std::to_string(rule_index) +
                                  " references undeclared term '" + clause.term +
                                  "' on variable '" + clause.variable + "'");
        }
    }

    std::vector<LinguisticVariable> variables_;
    std::vector<Rule> rules_;
};

using DegreeMap = std::map<std::string, double>;

inline DegreeMap fuzzify(const LinguisticVariable& variable, double crisp) {
    if (variable.kind() != VariableKind::input) {
        throw DefinitionError("fuzzify expects an input variable, got '" + variable.name() +
                              "'");
    }
    if (!std::isfinite(crisp)) {
        throw SensorFault("non-finite reading for variable '" + variable.name() + "'");
    }
    DegreeMap degrees;
    for (const auto& [term_name, mf] : variable.terms()) {
        degrees[term_name] = mf.evaluate(crisp);
    }
    return degrees;
}

inline double fire_rule(const Rule& rule, const std::map<std::string, DegreeMap>& fuzzified) {
    double strength = 1.0;
    for (const RuleClause& clause : rule.antecedent) {
        auto var_it = fuzzified.find(clause.variable);
        if (var_it == fuzzified.end()) {
            throw DefinitionError("no fuzzified degrees for variable '" + clause.variable + "'");
        }
        auto term_it = var_it->second.find(clause.term);
        if (term_it == var_it->second.end()) {
            throw DefinitionError("no degree for term '" + clause.term + "' of variable '" +
                                  clause.variable + "'");
        }
        strength = std::min(strength, term_it->second);
    }
    return strength;
}

struct AggregatedOutputSet {
    std::string variable;
    UniverseInterval universe;
    std::vector<double> degrees;
};

inline AggregatedOutputSet aggregate(const FisDefinition& fis,
                                     const std::vector<double>& strengths,
                                     std::string_view output_name) {
    const LinguisticVariable* out = fis.find_variable(output_name);
    if (out == nullptr || out->kind() != VariableKind::output) {
        throw DefinitionError("aggregate expects an output variable");
    }
    if (strengths.size() != fis.rules().size()) {
        throw DefinitionError("strength vector length does not match rule count");
    }
    AggregatedOutputSet set;
    set.variable = out->name();
    set.universe = out->universe();
    set.degrees.assign(set.universe.sample_count(), 0.0);

    for (std::size_t r = 0; r < fis.rules().size(); ++r) {
        const double strength = strengths[r];
        if (strength <= 0.0) {
            continue;
        }
        for (const RuleClause& clause : fis.rules()[r].consequent) {
            if (clause.variable != out->name()) {
                continue;
            }
            const PiecewiseLinearMf* mf = out->find_term(clause.term);
            for (std::size_t i = 0; i < set.degrees.size(); ++i) {
                const double clipped = std::min(strength, mf->evaluate(set.universe.sample_at(i)));
                set.degrees[i] = std::max(set.degrees[i], clipped);
            }
        }
    }
    return set;
}

// Centroid over the sampled set with trapezoid end weights.  An aggregate whose
// mass is below 1e-12 defuzzifies to zero.
inline double defuzzify_centroid(const AggregatedOutputSet& set) {
    const std::size_t n = set.degrees.size();
    if (n == 0) {
        return 0.0;
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        const double mu = w * set.degrees[i];
        num += mu * set.universe.sample_at(i);
        den += mu;
    }
    if (den < 1e-12) {
        return 0.0;
    }
    return num / den;
}

inline std::map<std::string, double> infer(const FisDefinition& fis,
                                           const std::map<std::string, double>& inputs) {
    std::map<std::string, DegreeMap> fuzzified;
    for (const LinguisticVariable* input : fis.inputs()) {
        auto it = inputs.find(input->name());
        if (it == inputs.end()) {
            throw DefinitionError("missing input '" + input->name() + "'");
        }
        fuzzified.emplace(input->name(), fuzzify(*input, it->second));
    }
    std::vector<double> strengths;
    strengths.reserve(fis.rules().size());
    for (const Rule& rule : fis.rules()) {
        strengths.push_back(fire_rule(rule, fuzzified));
    }
    std::map<std::string, double> result;
    for (const LinguisticVariable* output : fis.outputs()) {
        result[output->name()] = defuzzify_centroid(aggregate(fis, strengths, output->name()));
    }
    return result;
}

// Engine precomputes per-term sample curves and compiles rules to indices, so
// repeated inference avoids string lookups and per-sample interpolation.  The
// results are bit-identical to the free functions above: clipping the max of
// clips equals the max of the individual clips, and no other arithmetic changes.
class Engine {
  public:
    explicit Engine(const FisDefinition& fis) : fis_(&fis) {
        for (std::size_t v = 0; v < fis.variables().size(); ++v) {
            const LinguisticVariable& var = fis.variables()[v];
            if (var.kind() == VariableKind::input) {
                input_slot_by_var_[var.name()] = inputs_.size();
                inputs_.push_back(&var);
            } else {
                output_slot_by_var_[var.name()] = outputs_.size();
                OutputTable table;
                table.variable = &var;
                const UniverseInterval& u = var.universe();
                const std::size_t n = u.sample_count();
                table.samples.resize(var.terms().size());
                for (std::size_t t = 0; t < var.terms().size(); ++t) {
                    table.samples[t].resize(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        table.samples[t][i] = var.terms()[t].second.evaluate(u.sample_at(i));
                    }
                }
                outputs_.push_back(std::move(table));
            }
        }
        for (const Rule& rule : fis.rules()) {
            CompiledRule cr;
            for (const RuleClause& clause : rule.antecedent) {
                const std::size_t slot = input_slot_by_var_.at(clause.variable);
                cr.antecedent.push_back(
                    {slot, *inputs_[slot]->term_index(clause.term)});
            }
            for (const RuleClause& clause : rule.consequent) {
                const std::size_t slot = output_slot_by_var_.at(clause.variable);
                cr.consequent.push_back(
                    {slot, *outputs_[slot].variable->term_index(clause.term)});
            }
            rules_.push_back(std::move(cr));
        }
    }

    const FisDefinition& definition() const { return *fis_; }

    std::size_t input_count() const { return inputs_.size(); }
    std::size_t output_count() const { return outputs_.size(); }

    std::size_t input_slot(std::string_view name) const {
        auto it = input_slot_by_var_.find(std::string(name));
        if (it == input_slot_by_var_.end()) {
            throw DefinitionError("unknown input variable");
        }
        return it->second;
    }

    std::size_t output_slot(std::string_view name) const {
        auto it = output_slot_by_var_.find(std::string(name));
        if (it == output_slot_by_var_.end()) {
            throw DefinitionError("unknown output variable");
        }
        return it->second;
    }

    const LinguisticVariable& output_variable(std::size_t slot) const {
        return *outputs_[slot].variable;
    }

    // Rule strengths for inputs given in input-slot order.
    std::vector<double> rule_strengths(const std::vector<double>& inputs) const {
        if (inputs.size() != inputs_.size()) {
            throw DefinitionError("input vector length does not match input count");
        }
        for (double x : inputs) {
            if (!std::isfinite(x)) {
                throw SensorFault("non-finite input value");
            }
        }
        std::vector<double> strengths(rules_.size());
        for (std::size_t r = 0; r < rules_.size(); ++r) {
            double s = 1.0;
            for (const auto& [slot, term] : rules_[r].antecedent) {
                s = std::min(s, inputs_[slot]->terms()[term].second.evaluate(inputs[slot]));
            }
            strengths[r] = s;
        }
        return strengths;
    }

    // Per-term clip levels for one output: the max strength over rules whose
    // consequent names that term.
    std::vector<double> term_clips(std::size_t output_slot,
                                   const std::vector<double>& strengths) const {
        const OutputTable& table = outputs_[output_slot];
        std::vector<double> clips(table.variable->terms().size(), 0.0);
        for (std::size_t r = 0; r < rules_.size(); ++r) {
            if (strengths[r] <= 0.0) {
                continue;
            }
            for (const auto& [slot, term] : rules_[r].consequent) {
                if (slot == output_slot) {
                    clips[term] = std::max(clips[term], strengths[r]);
                }
            }
        }
        return clips;
    }

    double defuzzify_clips(std::size_t output_slot, const std::vector<double>& clips) const {
        const OutputTable& table = outputs_[output_slot];
        const UniverseInterval& u = table.variable->universe();
        const std::size_t n = u.sample_count();

        std::vector<std::size_t> active;
        for (std::size_t t = 0; t < clips.size(); ++t) {
            if (clips[t] > 0.0) {
                active.push_back(t);
            }
        }
        if (active.empty()) {
            return 0.0;
        }

        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mu = 0.0;
            for (std::size_t t : active) {
                mu = std::max(mu, std::min(clips[t], table.samples[t][i]));
            }
            const double w = (i == 0 || i == n - 1) ? 0.5 * mu : mu;
            num += w * u.sample_at(i);
            den += w;
        }
        if (den < 1e-12) {
            return 0.0;
        }
        return num / den;
    }

    std::vector<double> infer_slots(const std::vector<double>& inputs) const {
        const std::vector<double> strengths = rule_strengths(inputs);
        std::vector<double> result(outputs_.size());
        for (std::size_t o = 0; o < outputs_.size(); ++o) {
            result[o] = defuzzify_clips(o, term_clips(o, strengths));
        }
        return result;
    }

    std::map<std::string, double> infer(const std::map<std::string, double>& named) const {
        std::vector<double> inputs(inputs_.size());
        for (std::size_t s = 0; s < inputs_.size(); ++s) {
            auto it = named.find(inputs_[s]->name());
            if (it == named.end()) {
                throw DefinitionError("missing input '" + inputs_[s]->name() + "'");
            }
            inputs[s] = it->second;
        }
        const std::vector<double> values = infer_slots(inputs);
        std::map<std::string, double> result;
        for (std::size_t o = 0; o < outputs_.size(); ++o) {
            result[outputs_[o].variable->name()] = values[o];
        }
        return result;
    }

  private:
    struct CompiledClause {
        std::size_t slot;
        std::size_t term;
    };

    struct CompiledRule {
        std::vector<CompiledClause> antecedent;
        std::vector<CompiledClause> consequent;
    };

    struct OutputTable {
        const LinguisticVariable* variable;
        std::vector<std::vector<double>> samples;
    };

    const FisDefinition* fis_;
    std::vector<const LinguisticVariable*> inputs_;
    std::vector<OutputTable> outputs_;
    std::vector<CompiledRule> rules_;
    std::map<std::string, std::size_t> input_slot_by_var_;
    std::map<std::string, std::size_t> output_slot_by_var_;
};

}  // namespace fuzzydose
