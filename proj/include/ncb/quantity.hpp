#pragma once

// Quantity extraction and comparison: tokenizer, closed unit table,
// quantity/condition parsing over token streams, dimension-aware
// satisfaction checks, and scientific-form decomposition.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ncb/common.hpp"

namespace ncb {

// -------------------------- tokenizer --------------------------------------
// Lowercased ASCII tokens of three kinds:
//   words    [a-z]+ runs
//   numbers  digit runs, with ',' or '.' allowed only between digits and an
//            optional e/E[+-]digits exponent tail ("20,000", "3.5", "1e+09")
//   percent  '%' as a standalone token
// Everything else (punctuation, '$', non-ASCII bytes) separates tokens.
std::vector<std::string> tokenize(std::string_view text);

// Parses a number token ("20,000" -> 20000). Returns nullopt for word tokens
// and for malformed digit strings the scanner let through (e.g. "1.2.3").
std::optional<double> parse_number(std::string_view token);

// -------------------------- unit table -------------------------------------
using UnitId = int;  // index into UnitTable; queries/docs may carry no unit

struct UnitDef {
    std::string id;                     // canonical lowercase name, e.g. "gb"
    std::string dimension;              // e.g. "storage"
    double to_base;                     // multiply to convert into the dimension base
    std::vector<std::string> surfaces;  // lowercase token spellings
};

class UnitTable {
  public:
    // Built-in table: storage, currency, mass, pressure, data-rate, percent.
    static const UnitTable& builtin();

    static UnitTable from_units(std::vector<UnitDef> units);

    // TSV: unit_id<TAB>dimension<TAB>factor<TAB>surface1,surface2,...
    // '#' starts a comment line. Validated on load (unique ids/surfaces,
    // factor > 0, one dimension per unit).
    static UnitTable load(const std::string& path);
    void save(const std::string& path) const;
    std::string to_tsv() const;
    static UnitTable parse_tsv(const std::string& text);

    int size() const { return static_cast<int>(units_.size()); }
    const UnitDef& unit(UnitId u) const { return units_[static_cast<size_t>(u)]; }
    std::optional<UnitId> find_surface(std::string_view token) const;
    std::optional<UnitId> find_id(std::string_view id) const;

    // Conversion factor from unit `a` to unit `b`; nullopt across dimensions.
    std::optional<double> factor(UnitId a, UnitId b) const;

  private:
    std::vector<UnitDef> units_;
    void index_surfaces();
    std::vector<std::pair<std::string, int>> surface_index_;  // sorted
    std::vector<std::pair<std::string, int>> id_index_;       // sorted
};

// -------------------------- quantities -------------------------------------
struct Quantity {
    double value = 0.0;
    std::optional<UnitId> unit;  // nullopt: dimensionless / unknown
    int span_begin = 0;          // token index range [begin, end)
    int span_end = 0;
};

enum class Cmp { EQ, LT, GT };

const char* cmp_name(Cmp c);                     // "EQ" / "LT" / "GT"
std::optional<Cmp> cmp_from_name(std::string_view s);

struct NumericalCondition {
    double value = 0.0;
    Cmp cmp = Cmp::EQ;
    std::optional<UnitId> unit;
};

enum class CondCheck { Satisfied, Violated, Incomparable };

// Multiplier words that scale an immediately preceding number token.
std::optional<double> multiplier_word(std::string_view token);

// All quantity mentions in `tokens`, left to right. A mention is a number
// token, optionally followed by multiplier words ("1 billion") and then
// optionally by a unit-surface token ("500 gb"). Spans are token indices.
std::vector<Quantity> parse_quantities_tokens(const std::vector<std::string>& tokens,
                                              const UnitTable& table);
std::vector<Quantity> parse_quantities(std::string_view text, const UnitTable& table);

// Ground-truth numeric-token labels: 1 for every token inside a quantity
// mention span (number, multiplier words, unit token), 0 elsewhere.
std::vector<uint8_t> numeric_token_labels(const std::vector<std::string>& tokens,
                                          const UnitTable& table);

// Extracts (value, cmp, unit) from a query. Comparator keywords: GT {over,
// above, greater, "more than", "at least"}, LT {under, below, "less than",
// "at most"}; GT/LT take precedence over EQ cues {exactly, equal, of}; no
// keyword means EQ. The quantity nearest the keyword is bound (ties prefer
// the following one). Returns nullopt when no quantity is present.
std::optional<NumericalCondition> parse_condition(std::string_view text, const UnitTable& table);

// Converts q into `target` units. nullopt when dimensions differ or exactly
// one side is unitless; unitless-to-unitless is the identity.
std::optional<Quantity> convert(const Quantity& q, std::optional<UnitId> target,
                                const UnitTable& table);

// Does document quantity q satisfy the condition? Unit handling: both
// unitless compares values directly; one side unitless or incompatible
// dimensions is Incomparable; otherwise q is converted into cond's unit.
// EQ uses relative tolerance: |v' - v| <= tol * max(|v|, 1).
CondCheck satisfies(const Quantity& q, const NumericalCondition& cond, const UnitTable& table,
                    double eq_tol = 1e-9);

// -------------------------- scientific form --------------------------------
struct ScientificForm {
    double mantissa = 0.0;  // in [1, 10) for finite nonzero v; 0 for v == 0
    int exponent = 0;
    int sign = 1;  // +1 / -1; v == 0 has sign +1
};

// v == sign * mantissa * 10^exponent exactly up to f64 rounding.
ScientificForm to_scientific(double v);

// Shortest round-trip decimal rendering (std::to_chars).
std::string format_double(double v);

}  // namespace ncb
