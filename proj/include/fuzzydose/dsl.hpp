#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "fuzzydose/errors.hpp"
#include "fuzzydose/fis.hpp"

namespace fuzzydose::dsl {

// Shortest plain-decimal spelling that parses back to exactly the same double.
inline std::string format_decimal(double value) {
    if (value == 0.0) {
        return "0";
    }
    char buf[512];
    for (int precision = 0; precision <= 340; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
        if (std::strtod(buf, nullptr) == value) {
            return buf;
        }
    }
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

struct Token {
    enum class Kind { identifier, keyword, number, punct, end };

    Kind kind = Kind::end;
    std::string text;
    int line = 1;
    int column = 1;
};

namespace detail {

inline bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
inline bool is_ident_char(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9');
}
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> lex(std::string_view text) {
    std::vector<Token> tokens;
    int line = 1;
    int column = 1;
    std::size_t i = 0;

    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (text[i + k] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        i += n;
    };

    while (i < text.size()) {
        const char c = text[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance(1);
            continue;
        }
        if (c == '#') {
            std::size_t n = 0;
            while (i + n < text.size() && text[i + n] != '\n') {
                ++n;
            }
            advance(n);
            continue;
        }
        const int tok_line = line;
        const int tok_column = column;
        if (is_ident_start(c)) {
            std::size_t n = 1;
            while (i + n < text.size() && is_ident_char(text[i + n])) {
                ++n;
            }
            tokens.push_back({Token::Kind::identifier, std::string(text.substr(i, n)),
                              tok_line, tok_column});
            advance(n);
            continue;
        }
        if (c >= 'A' && c <= 'Z') {
            std::size_t n = 1;
            while (i + n < text.size() && text[i + n] >= 'A' && text[i + n] <= 'Z') {
                ++n;
            }
            const std::string word(text.substr(i, n));
            if (word != "IF" && word != "IS" && word != "AND" && word != "THEN") {
                throw ParseError(tok_line, tok_column, "unknown keyword '" + word + "'");
            }
            tokens.push_back({Token::Kind::keyword, word, tok_line, tok_column});
            advance(n);
            continue;
        }
        if (is_digit(c) || ((c == '-' || c == '+') && i + 1 < text.size() &&
                            (is_digit(text[i + 1]) || text[i + 1] == '.'))) {
            std::size_t n = (c == '-' || c == '+') ? 1 : 0;
            std::size_t digits = 0;
            while (i + n < text.size() && is_digit(text[i + n])) {
                ++n;
                ++digits;
            }
            if (i + n < text.size() && text[i + n] == '.') {
                ++n;
                std::size_t frac = 0;
                while (i + n < text.size() && is_digit(text[i + n])) {
                    ++n;
                    ++frac;
                }
                if (frac == 0) {
                    throw ParseError(tok_line, tok_column,
                                     "malformed number '" + std::string(text.substr(i, n)) +
                                         "'");
                }
            }
            if (digits == 0) {
                throw ParseError(tok_line, tok_column,
                                 "malformed number '" + std::string(text.substr(i, n)) + "'");
            }
            tokens.push_back({Token::Kind::number, std::string(text.substr(i, n)), tok_line,
                              tok_column});
            advance(n);
            continue;
        }
        if (c == ':' || c == '{' || c == '}' || c == '=' || c == '(' || c == ')' || c == ',') {
            tokens.push_back({Token::Kind::punct, std::string(1, c), tok_line, tok_column});
            advance(1);
            continue;
        }
        throw ParseError(tok_line, tok_column,
                         std::string("unexpected character '") + c + "'");
    }
    Token eof;
    eof.kind = Token::Kind::end;
    eof.line = line;
    eof.column = column;
    tokens.push_back(eof);
    return tokens;
}

class Parser {
  public:
    explicit Parser(std::string_view text) : tokens_(lex(text)) {}

    FisDefinition parse() {
        std::vector<LinguisticVariable> variables;
        std::vector<Rule> rules;
        while (peek().kind != Token::Kind::end) {
            const Token& t = peek();
            if (t.kind == Token::Kind::identifier && t.text == "var") {
                variables.push_back(parse_variable());
            } else if (t.kind == Token::Kind::identifier && t.text == "rule") {
                rules.push_back(parse_rule());
            } else {
                throw ParseError(t.line, t.column,
                                 "expected 'var' or 'rule', got " + describe(t));
            }
        }
        return FisDefinition(std::move(variables), std::move(rules));
    }

  private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& advance() { return tokens_[pos_++]; }

    static std::string describe(const Token& t) {
        if (t.kind == Token::Kind::end) {
            return "end of input";
        }
        return "'" + t.text + "'";
    }

    const Token& expect_ident() {
        const Token& t = advance();
        if (t.kind != Token::Kind::identifier) {
            throw ParseError(t.line, t.column, "expected identifier, got " + describe(t));
        }
        return t;
    }

    void expect_word(const char* word) {
        const Token& t = advance();
        if (t.kind != Token::Kind::identifier || t.text != word) {
            throw ParseError(t.line, t.column,
                             "expected '" + std::string(word) + "', got " + describe(t));
        }
    }

    void expect_keyword(const char* word) {
        const Token& t = advance();
        if (t.kind != Token::Kind::keyword || t.text != word) {
            throw ParseError(t.line, t.column,
                             "expected '" + std::string(word) + "', got " + describe(t));
        }
    }

    void expect_punct(char c) {
        const Token& t = advance();
        if (t.kind != Token::Kind::punct || t.text[0] != c) {
            throw ParseError(t.line, t.column,
                             "expected '" + std::string(1, c) + "', got " + describe(t));
        }
    }

    double expect_number() {
        const Token& t = advance();
        if (t.kind != Token::Kind::number) {
            throw ParseError(t.line, t.column, "expected number, got " + describe(t));
        }
        return std::strtod(t.text.c_str(), nullptr);
    }

    bool peek_word(const char* word) const {
        return peek().kind == Token::Kind::identifier && peek().text == word;
    }

    LinguisticVariable parse_variable() {
        expect_word("var");
        const std::string name = expect_ident().text;
        expect_punct(':');
        const Token& kind_tok = expect_ident();
        VariableKind kind;
        if (kind_tok.text == "input") {
            kind = VariableKind::input;
        } else if (kind_tok.text == "output") {
            kind = VariableKind::output;
        } else {
            throw ParseError(kind_tok.line, kind_tok.column,
                             "expected 'input' or 'output', got '" + kind_tok.text + "'");
        }
        expect_word("range");
        const double lo = expect_number();
        const double hi = expect_number();
        double resolution = (hi - lo) / 100.0;
        if (peek_word("resolution")) {
            advance();
            resolution = expect_number();
        }
        LinguisticVariable variable(name, kind, UniverseInterval(lo, hi, resolution));
        expect_punct('{');
        while (peek().kind == Token::Kind::identifier) {
            parse_term(variable);
        }
        expect_punct('}');
        return variable;
    }

    void parse_term(LinguisticVariable& variable) {
        const std::string term_name = expect_ident().text;
        expect_punct('=');
        const Token& shape = expect_ident();
        expect_punct('(');
        std::vector<double> args;
        args.push_back(expect_number());
        while (peek().kind == Token::Kind::punct && peek().text[0] == ',') {
            advance();
            args.push_back(expect_number());
        }
        expect_punct(')');

        std::size_t expected = 0;
        if (shape.text == "shoulder_down" || shape.text == "shoulder_up") {
            expected = 2;
        } else if (shape.text == "triangle") {
            expected = 3;
        } else if (shape.text == "trapezoid") {
            expected = 4;
        } else {
            throw ParseError(shape.line, shape.column, "unknown shape '" + shape.text + "'");
        }
        if (args.size() != expected) {
            throw ParseError(shape.line, shape.column,
                             "shape '" + shape.text + "' expects " + std::to_string(expected) +
                                 " arguments, got " + std::to_string(args.size()));
        }
        if (shape.text == "shoulder_down") {
            variable.add_term(term_name, PiecewiseLinearMf::shoulder_down(args[0], args[1]));
        } else if (shape.text == "shoulder_up") {
            variable.add_term(term_name, PiecewiseLinearMf::shoulder_up(args[0], args[1]));
        } else if (shape.text == "triangle") {
            variable.add_term(term_name,
                              PiecewiseLinearMf::triangle(args[0], args[1], args[2]));
        } else {
            variable.add_term(
                term_name, PiecewiseLinearMf::trapezoid(args[0], args[1], args[2], args[3]));
        }
    }

    Rule parse_rule() {
        expect_word("rule");
        expect_punct(':');
        expect_keyword("IF");
        Rule rule;
        rule.antecedent.push_back(parse_clause());
        while (peek().kind == Token::Kind::keyword && peek().text == "AND") {
            advance();
            rule.antecedent.push_back(parse_clause());
        }
        expect_keyword("THEN");
        rule.consequent.push_back(parse_clause());
        while (peek().kind == Token::Kind::punct && peek().text[0] == ',') {
            advance();
            rule.consequent.push_back(parse_clause());
        }
        return rule;
    }

    RuleClause parse_clause() {
        RuleClause clause;
        clause.variable = expect_ident().text;
        expect_keyword("IS");
        clause.term = expect_ident().text;
        return clause;
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

inline std::string shape_expression(const PiecewiseLinearMf& mf) {
    const std::vector<MfPoint>& p = mf.breakpoints();
    auto deg_is = [&](std::size_t i, double d) { return p[i].degree == d; };
    auto args = [](std::initializer_list<double> xs) {
        std::string out;
        for (double x : xs) {
            if (!out.empty()) {
                out += ", ";
            }
            out += format_decimal(x);
        }
        return out;
    };
    if (p.size() == 2) {
        if (deg_is(0, 1.0) && deg_is(1, 0.0)) {
            return "shoulder_down(" + args({p[0].x, p[1].x}) + ")";
        }
        if (deg_is(0, 0.0) && deg_is(1, 1.0)) {
            return "shoulder_up(" + args({p[0].x, p[1].x}) + ")";
        }
    } else if (p.size() == 3) {
        if (deg_is(0, 0.0) && deg_is(1, 1.0) && deg_is(2, 0.0)) {
            return "triangle(" + args({p[0].x, p[1].x, p[2].x}) + ")";
        }
        if (deg_is(0, 0.0) && deg_is(1, 1.0) && deg_is(2, 1.0)) {
            return "trapezoid(" + args({p[0].x, p[1].x, p[2].x, p[2].x}) + ")";
        }
        if (deg_is(0, 1.0) && deg_is(1, 1.0) && deg_is(2, 0.0)) {
            return "trapezoid(" + args({p[0].x, p[0].x, p[1].x, p[2].x}) + ")";
        }
    } else if (p.size() == 4) {
        if (deg_is(0, 0.0) && deg_is(1, 1.0) && deg_is(2, 1.0) && deg_is(3, 0.0)) {
            return "trapezoid(" + args({p[0].x, p[1].x, p[2].x, p[3].x}) + ")";
        }
    }
    throw DefinitionError("membership function is not expressible as a shape constructor");
}

// Canonical text form: input variables first then outputs, each group sorted by
// name; terms sorted by name; resolution always written; rules kept verbatim in
// their stored order.
inline std::string serialize(const FisDefinition& fis) {
    std::string out;
    auto emit_group = [&](VariableKind kind) {
        std::vector<const LinguisticVariable*> group;
        for (const LinguisticVariable& v : fis.variables()) {
            if (v.kind() == kind) {
                group.push_back(&v);
            }
        }
        std::sort(group.begin(), group.end(),
                  [](const LinguisticVariable* a, const LinguisticVariable* b) {
                      return a->name() < b->name();
                  });
        for (const LinguisticVariable* v : group) {
            out += "var " + v->name() + " : " +
                   (kind == VariableKind::input ? "input" : "output") + " range " +
                   format_decimal(v->universe().lo) + " " + format_decimal(v->universe().hi) +
                   " resolution " + format_decimal(v->universe().resolution) + " {\n";
            std::vector<const std::pair<std::string, PiecewiseLinearMf>*> terms;
            for (const auto& term : v->terms()) {
                terms.push_back(&term);
            }
            std::sort(terms.begin(), terms.end(),
                      [](const auto* a, const auto* b) { return a->first < b->first; });
            for (const auto* term : terms) {
                out += "  " + term->first + " = " + shape_expression(term->second) + "\n";
            }
            out += "}\n\n";
        }
    };
    emit_group(VariableKind::input);
    emit_group(VariableKind::output);
    for (const Rule& rule : fis.rules()) {
        out += "rule: IF ";
        for (std::size_t i = 0; i < rule.antecedent.size(); ++i) {
            if (i > 0) {
                out += " AND ";
            }
            out += rule.antecedent[i].variable + " IS " + rule.antecedent[i].term;
        }
        out += " THEN ";
        for (std::size_t i = 0; i < rule.consequent.size(); ++i) {
            if (i > 0) {
                out += ", ";
            }
            out += rule.consequent[i].variable + " IS " + rule.consequent[i].term;
        }
        out += "\n";
    }
    return out;
}

}  // namespace detail

inline FisDefinition parse(std::string_view text) { return detail::Parser(text).parse(); }

inline std::string serialize(const FisDefinition& fis) { return detail::serialize(fis); }

enum class Severity { info, warning, error };

struct Diagnostic {
    Severity severity = Severity::info;
    std::string message;
};

// Static checks: untargeted outputs (error when the rule list is empty, warning
// otherwise), input regions where an output receives no active rule, rules that
// never fire, and input term sets that fail to sum to one across the universe.
inline std::vector<Diagnostic> validate(const FisDefinition& fis) {
    std::vector<Diagnostic> diagnostics;
    const Engine engine(fis);

    std::vector<const LinguisticVariable*> outputs = fis.outputs();
    std::vector<bool> targeted(outputs.size(), false);
    for (const Rule& rule : fis.rules()) {
        for (const RuleClause& clause : rule.consequent) {
            for (std::size_t o = 0; o < outputs.size(); ++o) {
                if (outputs[o]->name() == clause.variable) {
                    targeted[o] = true;
                }
            }
        }
    }
    for (std::size_t o = 0; o < outputs.size(); ++o) {
        if (targeted[o]) {
            continue;
        }
        if (fis.rules().empty()) {
            diagnostics.push_back({Severity::error, "rule list is empty; output '" +
                                                        outputs[o]->name() +
                                                        "' is never targeted"});
        } else {
            diagnostics.push_back({Severity::warning, "output '" + outputs[o]->name() +
                                                          "' is not targeted by any rule"});
        }
    }

    const std::vector<const LinguisticVariable*> inputs = fis.inputs();
    for (const LinguisticVariable* input : inputs) {
        const UniverseInterval& u = input->universe();
        double max_dev = 0.0;
        double worst_x = u.lo;
        for (std::size_t i = 0; i < u.sample_count(); ++i) {
            const double x = u.sample_at(i);
            double sum = 0.0;
            for (const auto& [name, mf] : input->terms()) {
                sum += mf.evaluate(x);
            }
            const double dev = std::fabs(sum - 1.0);
            if (dev > max_dev) {
                max_dev = dev;
                worst_x = x;
            }
        }
        if (max_dev > 1e-9) {
            diagnostics.push_back(
                {Severity::info, "terms of input '" + input->name() +
                                     "' deviate from a partition of unity by up to " +
                                     format_decimal(max_dev) + " (at " + input->name() + "=" +
                                     format_decimal(worst_x) + ")"});
        }
    }

    if (!inputs.empty() && !fis.rules().empty()) {
        std::vector<std::size_t> strides(inputs.size(), 1);
        auto total_points = [&]() {
            double total = 1.0;
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                const std::size_t n = inputs[k]->universe().sample_count();
                total *= static_cast<double>((n + strides[k] - 1) / strides[k]);
            }
            return total;
        };
        while (total_points() > 2'000'000.0) {
            std::size_t densest = 0;
            std::size_t densest_count = 0;
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                const std::size_t n = inputs[k]->universe().sample_count() / strides[k];
                if (n > densest_count) {
                    densest_count = n;
                    densest = k;
                }
            }
            strides[densest] *= 2;
        }

        std::vector<std::vector<std::size_t>> rules_for_output(outputs.size());
        for (std::size_t r = 0; r < fis.rules().size(); ++r) {
            for (const RuleClause& clause : fis.rules()[r].consequent) {
                for (std::size_t o = 0; o < outputs.size(); ++o) {
                    if (outputs[o]->name() == clause.variable) {
                        rules_for_output[o].push_back(r);
                    }
                }
            }
        }

        std::vector<std::size_t> hole_count(outputs.size(), 0);
        std::vector<std::vector<double>> first_hole(outputs.size());
        std::vector<bool> rule_fired(fis.rules().size(), false);
        std::size_t visited = 0;

        std::vector<std::size_t> idx(inputs.size(), 0);
        std::vector<double> point(inputs.size(), 0.0);
        bool done = false;
        while (!done) {
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                point[k] = inputs[k]->universe().sample_at(idx[k]);
            }
            ++visited;
            const std::vector<double> strengths = engine.rule_strengths(point);
            for (std::size_t r = 0; r < strengths.size(); ++r) {
                if (strengths[r] > 0.0) {
                    rule_fired[r] = true;
                }
            }
            for (std::size_t o = 0; o < outputs.size(); ++o) {
                if (!targeted[o]) {
                    continue;
                }
                bool active = false;
                for (std::size_t r : rules_for_output[o]) {
                    if (strengths[r] > 0.0) {
                        active = true;
                        break;
                    }
                }
                if (!active) {
                    if (hole_count[o] == 0) {
                        first_hole[o] = point;
                    }
                    ++hole_count[o];
                }
            }
            std::size_t k = 0;
            for (;; ++k) {
                if (k == inputs.size()) {
                    done = true;
                    break;
                }
                idx[k] += strides[k];
                if (idx[k] < inputs[k]->universe().sample_count()) {
                    break;
                }
                idx[k] = 0;
            }
        }

        for (std::size_t o = 0; o < outputs.size(); ++o) {
            if (hole_count[o] == 0) {
                continue;
            }
            std::string where;
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                if (k > 0) {
                    where += ", ";
                }
                where += inputs[k]->name() + "=" + format_decimal(first_hole[o][k]);
            }
            diagnostics.push_back(
                {Severity::warning,
                 "output '" + outputs[o]->name() + "' has no active rule at " +
                     std::to_string(hole_count[o]) + " of " + std::to_string(visited) +
                     " sampled input points (first at " + where + ")"});
        }
        for (std::size_t r = 0; r < rule_fired.size(); ++r) {
            if (!rule_fired[r]) {
                diagnostics.push_back({Severity::warning,
                                       "rule " + std::to_string(r) +
                                           " never fires on the sampled input grid"});
            }
        }
    }

    return diagnostics;
}

}  // namespace fuzzydose::dsl
