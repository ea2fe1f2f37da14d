#include "ncb/quantity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace ncb {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    const size_t n = text.size();
    size_t i = 0;
    while (i < n) {
        const char c = text[i];
        if (is_digit(c)) {
            size_t j = i + 1;
            // digits with ',' or '.' strictly between digits
            while (j < n) {
                if (is_digit(text[j])) {
                    ++j;
                } else if ((text[j] == ',' || text[j] == '.') && j + 1 < n && is_digit(text[j + 1])) {
                    j += 2;
                } else {
                    break;
                }
            }
            // optional exponent tail: e/E [+-]? digits
            if (j < n && (text[j] == 'e' || text[j] == 'E')) {
                size_t k = j + 1;
                if (k < n && (text[k] == '+' || text[k] == '-')) ++k;
                if (k < n && is_digit(text[k])) {
                    ++k;
                    while (k < n && is_digit(text[k])) ++k;
                    j = k;
                }
            }
            std::string tok(text.substr(i, j - i));
            for (char& ch : tok) ch = lower(ch);
            out.push_back(std::move(tok));
            i = j;
        } else if (is_alpha(c)) {
            size_t j = i + 1;
            while (j < n && is_alpha(text[j])) ++j;
            std::string tok(text.substr(i, j - i));
            for (char& ch : tok) ch = lower(ch);
            out.push_back(std::move(tok));
            i = j;
        } else if (c == '%') {
            out.emplace_back("%");
            ++i;
        } else {
            ++i;  // separator: punctuation, whitespace, non-ASCII bytes
        }
    }
    return out;
}

std::optional<double> parse_number(std::string_view token) {
    if (token.empty() || !is_digit(token[0])) return std::nullopt;
    std::string clean;
    clean.reserve(token.size());
    for (char c : token) {
        if (c != ',') clean.push_back(c);
    }
    // validate: digits [. digits] [e [+-] digits]
    size_t i = 0;
    const size_t n = clean.size();
    while (i < n && is_digit(clean[i])) ++i;
    if (i == 0) return std::nullopt;
    if (i < n && clean[i] == '.') {
        ++i;
        const size_t frac_start = i;
        while (i < n && is_digit(clean[i])) ++i;
        if (i == frac_start) return std::nullopt;
    }
    if (i < n && (clean[i] == 'e' || clean[i] == 'E')) {
        ++i;
        if (i < n && (clean[i] == '+' || clean[i] == '-')) ++i;
        const size_t exp_start = i;
        while (i < n && is_digit(clean[i])) ++i;
        if (i == exp_start) return std::nullopt;
    }
    if (i != n) return std::nullopt;
    double v = 0.0;
    const auto [p, ec] = std::from_chars(clean.data(), clean.data() + clean.size(), v);
    if (ec != std::errc() || p != clean.data() + clean.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

// -------------------------- unit table -------------------------------------

void UnitTable::index_surfaces() {
    surface_index_.clear();
    id_index_.clear();
    for (int u = 0; u < size(); ++u) {
        id_index_.emplace_back(units_[static_cast<size_t>(u)].id, u);
        for (const auto& s : units_[static_cast<size_t>(u)].surfaces) {
            surface_index_.emplace_back(s, u);
        }
    }
    std::sort(surface_index_.begin(), surface_index_.end());
    std::sort(id_index_.begin(), id_index_.end());
    for (size_t i = 1; i < surface_index_.size(); ++i) {
        if (surface_index_[i].first == surface_index_[i - 1].first) {
            throw data_error("duplicate unit surface: " + surface_index_[i].first);
        }
    }
    for (size_t i = 1; i < id_index_.size(); ++i) {
        if (id_index_[i].first == id_index_[i - 1].first) {
            throw data_error("duplicate unit id: " + id_index_[i].first);
        }
    }
}

UnitTable UnitTable::from_units(std::vector<UnitDef> units) {
    UnitTable t;
    for (const auto& u : units) {
        if (u.id.empty() || u.dimension.empty()) throw data_error("unit needs id and dimension");
        if (!(u.to_base > 0.0) || !std::isfinite(u.to_base)) {
            throw data_error("unit factor must be positive and finite: " + u.id);
        }
        if (u.surfaces.empty()) throw data_error("unit needs at least one surface: " + u.id);
    }
    t.units_ = std::move(units);
    t.index_surfaces();
    return t;
}

namespace {
std::optional<int> lookup(const std::vector<std::pair<std::string, int>>& idx,
                          std::string_view key) {
    auto it = std::lower_bound(idx.begin(), idx.end(), key,
                               [](const auto& a, std::string_view b) { return a.first < b; });
    if (it != idx.end() && it->first == key) return it->second;
    return std::nullopt;
}
}  // namespace

std::optional<UnitId> UnitTable::find_surface(std::string_view token) const {
    return lookup(surface_index_, token);
}

std::optional<UnitId> UnitTable::find_id(std::string_view id) const {
    return lookup(id_index_, id);
}

std::optional<double> UnitTable::factor(UnitId a, UnitId b) const {
    const UnitDef& ua = unit(a);
    const UnitDef& ub = unit(b);
    if (ua.dimension != ub.dimension) return std::nullopt;
    return ua.to_base / ub.to_base;
}

const UnitTable& UnitTable::builtin() {
    static const UnitTable table = from_units({
        // storage, base: gigabyte
        {"kb", "storage", 1e-6, {"kb", "kilobyte", "kilobytes"}},
        {"mb", "storage", 1e-3, {"mb", "megabyte", "megabytes"}},
        {"gb", "storage", 1.0, {"gb", "gigabyte", "gigabytes"}},
        {"tb", "storage", 1e3, {"tb", "terabyte", "terabytes"}},
        {"pb", "storage", 1e6, {"pb", "petabyte", "petabytes"}},
        // currency, base: US dollar
        {"usd", "currency", 1.0, {"usd", "dollar", "dollars"}},
        // mass, base: gram
        {"mg", "mass", 1e-3, {"mg", "milligram", "milligrams"}},
        {"g", "mass", 1.0, {"g", "gram", "grams"}},
        {"kg", "mass", 1e3, {"kg", "kilogram", "kilograms"}},
        {"ton", "mass", 1e6, {"ton", "tons", "tonne", "tonnes"}},
        {"lb", "mass", 453.59237, {"lb", "lbs", "pound", "pounds"}},
        {"oz", "mass", 28.349523125, {"oz", "ounce", "ounces"}},
        // pressure, base: mmHg
        {"mmhg", "pressure", 1.0, {"mmhg"}},
        {"pa", "pressure", 0.00750061682704, {"pa", "pascal", "pascals"}},
        {"kpa", "pressure", 7.50061682704, {"kpa", "kilopascal", "kilopascals"}},
        {"bar", "pressure", 750.061682704, {"bar", "bars"}},
        {"psi", "pressure", 51.7149325715, {"psi"}},
        // data rate, base: megabit per second
        {"kbps", "data_rate", 1e-3, {"kbps"}},
        {"mbps", "data_rate", 1.0, {"mbps"}},
        {"gbps", "data_rate", 1e3, {"gbps"}},
        // relative share, base: percent
        {"percent", "percent", 1.0, {"percent", "pct", "%"}},
        {"permille", "percent", 0.1, {"permille"}},
    });
    return table;
}

std::string UnitTable::to_tsv() const {
    std::string out;
    out += "# unit_id\tdimension\tfactor\tsurfaces\n";
    for (const auto& u : units_) {
        out += u.id;
        out += '\t';
        out += u.dimension;
        out += '\t';
        out += format_double(u.to_base);
        out += '\t';
        for (size_t i = 0; i < u.surfaces.size(); ++i) {
            if (i) out += ',';
            out += u.surfaces[i];
        }
        out += '\n';
    }
    return out;
}

void UnitTable::save(const std::string& path) const { write_file(path, to_tsv()); }

UnitTable UnitTable::parse_tsv(const std::string& text) {
    std::vector<UnitDef> units;
    size_t pos = 0;
    int lineno = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        size_t start = 0;
        for (size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == '\t') {
                fields.emplace_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (fields.size() != 4) {
            throw format_error("unit table line " + std::to_string(lineno) +
                               ": expected 4 tab-separated fields");
        }
        UnitDef u;
        u.id = fields[0];
        u.dimension = fields[1];
        for (char& c : u.id) c = lower(c);
        for (char& c : u.dimension) c = lower(c);
        const auto [p, ec] =
            std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), u.to_base);
        if (ec != std::errc() || p != fields[2].data() + fields[2].size()) {
            throw format_error("unit table line " + std::to_string(lineno) + ": bad factor");
        }
        start = 0;
        const std::string& surf = fields[3];
        for (size_t i = 0; i <= surf.size(); ++i) {
            if (i == surf.size() || surf[i] == ',') {
                std::string s = surf.substr(start, i - start);
                for (char& c : s) c = lower(c);
                if (!s.empty()) u.surfaces.push_back(std::move(s));
                start = i + 1;
            }
        }
        units.push_back(std::move(u));
    }
    try {
        return from_units(std::move(units));
    } catch (const data_error& e) {
        throw format_error(std::string("invalid unit table: ") + e.what());
    }
}

UnitTable UnitTable::load(const std::string& path) { return parse_tsv(read_file(path)); }

// -------------------------- quantities -------------------------------------

const char* cmp_name(Cmp c) {
    switch (c) {
        case Cmp::EQ: return "EQ";
        case Cmp::LT: return "LT";
        case Cmp::GT: return "GT";
    }
    return "EQ";
}

std::optional<Cmp> cmp_from_name(std::string_view s) {
    if (s == "EQ" || s == "eq") return Cmp::EQ;
    if (s == "LT" || s == "lt") return Cmp::LT;
    if (s == "GT" || s == "gt") return Cmp::GT;
    return std::nullopt;
}

std::optional<double> multiplier_word(std::string_view token) {
    if (token == "hundred") return 1e2;
    if (token == "thousand") return 1e3;
    if (token == "million") return 1e6;
    if (token == "billion") return 1e9;
    if (token == "trillion") return 1e12;
    return std::nullopt;
}

std::vector<Quantity> parse_quantities_tokens(const std::vector<std::string>& tokens,
                                              const UnitTable& table) {
    std::vector<Quantity> out;
    const int n = static_cast<int>(tokens.size());
    int i = 0;
    while (i < n) {
        const auto v = parse_number(tokens[static_cast<size_t>(i)]);
        if (!v) {
            ++i;
            continue;
        }
        Quantity q;
        q.span_begin = i;
        q.value = *v;
        ++i;
        while (i < n) {
            const auto m = multiplier_word(tokens[static_cast<size_t>(i)]);
            if (!m) break;
            q.value *= *m;
            ++i;
        }
        if (i < n) {
            if (const auto u = table.find_surface(tokens[static_cast<size_t>(i)])) {
                q.unit = *u;
                ++i;
            }
        }
        q.span_end = i;
        out.push_back(q);
    }
    return out;
}

std::vector<Quantity> parse_quantities(std::string_view text, const UnitTable& table) {
    return parse_quantities_tokens(tokenize(text), table);
}

std::vector<uint8_t> numeric_token_labels(const std::vector<std::string>& tokens,
                                          const UnitTable& table) {
    std::vector<uint8_t> labels(tokens.size(), 0);
    for (const auto& q : parse_quantities_tokens(tokens, table)) {
        for (int i = q.span_begin; i < q.span_end; ++i) labels[static_cast<size_t>(i)] = 1;
    }
    return labels;
}

namespace {

// Leftmost comparator keyword; GT/LT scanned before EQ cues so that phrases
// like "of more than 5" resolve to GT. Returns (token position, cmp).
std::optional<std::pair<int, Cmp>> find_keyword(const std::vector<std::string>& t) {
    const int n = static_cast<int>(t.size());
    for (int i = 0; i < n; ++i) {
        const std::string& w = t[static_cast<size_t>(i)];
        const std::string* next = (i + 1 < n) ? &t[static_cast<size_t>(i) + 1] : nullptr;
        if (next) {
            if ((w == "more" && *next == "than") || (w == "at" && *next == "least")) {
                return std::make_pair(i, Cmp::GT);
            }
            if ((w == "less" && *next == "than") || (w == "at" && *next == "most")) {
                return std::make_pair(i, Cmp::LT);
            }
        }
        if (w == "over" || w == "above" || w == "greater" || w == "exceeding") {
            return std::make_pair(i, Cmp::GT);
        }
        if (w == "under" || w == "below") return std::make_pair(i, Cmp::LT);
    }
    for (int i = 0; i < n; ++i) {
        const std::string& w = t[static_cast<size_t>(i)];
        if (w == "exactly" || w == "equal" || w == "of") return std::make_pair(i, Cmp::EQ);
    }
    return std::nullopt;
}

}  // namespace

std::optional<NumericalCondition> parse_condition(std::string_view text, const UnitTable& table) {
    const auto tokens = tokenize(text);
    const auto quantities = parse_quantities_tokens(tokens, table);
    if (quantities.empty()) return std::nullopt;

    NumericalCondition cond;
    cond.cmp = Cmp::EQ;
    const Quantity* bound = &quantities.front();
    if (const auto kw = find_keyword(tokens)) {
        cond.cmp = kw->second;
        // nearest quantity by span start; ties prefer the one after the keyword
        long best = -1;
        for (const auto& q : quantities) {
            const long d = (q.span_begin >= kw->first)
                               ? 2L * (q.span_begin - kw->first)
                               : 2L * (kw->first - q.span_begin) + 1;
            if (best < 0 || d < best) {
                best = d;
                bound = &q;
            }
        }
    }
    cond.value = bound->value;
    cond.unit = bound->unit;
    return cond;
}

std::optional<Quantity> convert(const Quantity& q, std::optional<UnitId> target,
                                const UnitTable& table) {
    if (!q.unit && !target) return q;  // unitless identity
    if (!q.unit || !target) return std::nullopt;
    const auto f = table.factor(*q.unit, *target);
    if (!f) return std::nullopt;
    Quantity out = q;
    out.value = q.value * *f;
    out.unit = target;
    return out;
}

CondCheck satisfies(const Quantity& q, const NumericalCondition& cond, const UnitTable& table,
                    double eq_tol) {
    double v;
    if (!q.unit && !cond.unit) {
        v = q.value;
    } else if (!q.unit || !cond.unit) {
        return CondCheck::Incomparable;
    } else {
        const auto f = table.factor(*q.unit, *cond.unit);
        if (!f) return CondCheck::Incomparable;
        v = q.value * *f;
    }
    switch (cond.cmp) {
        case Cmp::EQ: {
            const double tol = eq_tol * std::max(std::fabs(cond.value), 1.0);
            return std::fabs(v - cond.value) <= tol ? CondCheck::Satisfied : CondCheck::Violated;
        }
        case Cmp::GT:
            return v > cond.value ? CondCheck::Satisfied : CondCheck::Violated;
        case Cmp::LT:
            return v < cond.value ? CondCheck::Satisfied : CondCheck::Violated;
    }
    return CondCheck::Incomparable;
}

ScientificForm to_scientific(double v) {
    ScientificForm f;
    if (v == 0.0) {
        f.mantissa = 0.0;
        f.exponent = 0;
        f.sign = 1;
        return f;
    }
    f.sign = v < 0.0 ? -1 : 1;
    const double av = std::fabs(v);
    int e = static_cast<int>(std::floor(std::log10(av)));
    double m = av * std::pow(10.0, -e);
    while (m >= 10.0) {
        m /= 10.0;
        ++e;
    }
    while (m < 1.0) {
        m *= 10.0;
        --e;
    }
    f.mantissa = m;
    f.exponent = e;
    return f;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace ncb
