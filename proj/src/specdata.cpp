#include "hypogen/specdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <sstream>

namespace hypogen::specdata {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// True when s occurs in text at pos with word boundaries on both sides.
bool bounded_at(std::string_view text, size_t pos, size_t len) {
    if (pos > 0 && is_word_char(text[pos - 1]) && is_word_char(text[pos])) return false;
    size_t end = pos + len;
    if (end < text.size() && is_word_char(text[end - 1]) && is_word_char(text[end])) return false;
    return true;
}

// Case-insensitive bounded search for needle in haystack.
size_t ifind_bounded(std::string_view hay, std::string_view needle, size_t from = 0) {
    if (needle.empty()) return std::string_view::npos;
    std::string h = to_lower(hay), n = to_lower(needle);
    size_t pos = h.find(n, from);
    while (pos != std::string::npos) {
        if (bounded_at(hay, pos, needle.size())) return pos;
        pos = h.find(n, pos + 1);
    }
    return std::string_view::npos;
}

}  // namespace

std::string to_string(SampleClass c) {
    return c == SampleClass::Meteorite ? "Meteorite" : "Soil";
}

SampleClass sample_class_from_string(std::string_view s) {
    if (iequals(s, "meteorite")) return SampleClass::Meteorite;
    if (iequals(s, "soil")) return SampleClass::Soil;
    throw TableError("unknown sample class '" + std::string(s) + "' (expected Meteorite or Soil)");
}

std::string to_string(Polarity p) { return p == Polarity::Present ? "Present" : "Absent"; }

std::string to_string(const Assertion& a) {
    std::ostringstream os;
    os << to_string(a.polarity) << "(";
    if (a.compound.id)
        os << "ID " << *a.compound.id;
    else
        os << a.compound.name;
    os << ", " << a.sample << ")";
    return os.str();
}

// ---------------------------------------------------------------------------
// PresenceMatrix

PresenceMatrix::PresenceMatrix(std::vector<Compound> compounds, std::vector<Sample> samples,
                               std::set<std::pair<int, std::string>> presence)
    : compounds_(std::move(compounds)), samples_(std::move(samples)), presence_(std::move(presence)) {
    for (const auto& c : compounds_) {
        if (c.id <= 0) throw TableError("compound id must be positive, got " + std::to_string(c.id));
        if (c.name.empty()) throw TableError("compound " + std::to_string(c.id) + " has empty name");
        for (auto v : {c.molecular_weight, c.rt1, c.rt2, c.mz}) {
            if (v && *v <= 0.0)
                throw TableError("compound " + std::to_string(c.id) +
                                 " has non-positive peak metadata");
        }
        if (!by_id_.emplace(c.id, &c).second)
            throw TableError("duplicate compound id " + std::to_string(c.id));
    }
    std::set<std::string> seen;
    for (const auto& s : samples_) {
        if (s.name.empty()) throw TableError("sample with empty name");
        if (!seen.insert(to_lower(s.name)).second)
            throw TableError("duplicate sample name '" + s.name + "'");
    }
    for (const auto& [id, sample] : presence_) {
        if (!by_id_.count(id))
            throw TableError("presence pair references unknown compound id " + std::to_string(id));
        if (!find_sample(sample))
            throw TableError("presence pair references unknown sample '" + sample + "'");
    }
}

bool PresenceMatrix::has_compound(int id) const { return by_id_.count(id) > 0; }

bool PresenceMatrix::present(int compound_id, const std::string& sample_name) const {
    return presence_.count({compound_id, sample_name}) > 0;
}

std::set<std::string> PresenceMatrix::samples_of(int compound_id) const {
    if (!has_compound(compound_id)) throw UnknownCompoundError(compound_id);
    std::set<std::string> out;
    for (const auto& [id, name] : presence_)
        if (id == compound_id) out.insert(name);
    return out;
}

std::set<int> PresenceMatrix::exclusive_compounds(SampleClass klass) const {
    std::set<int> out;
    for (const auto& c : compounds_) {
        auto samples = samples_of(c.id);
        if (samples.empty()) continue;
        bool all_in_class = std::all_of(samples.begin(), samples.end(), [&](const std::string& n) {
            const Sample* s = find_sample(n);
            return s && s->klass == klass;
        });
        if (all_in_class) out.insert(c.id);
    }
    return out;
}

std::set<std::string> PresenceMatrix::co_occurring(const std::set<int>& ids) const {
    std::set<std::string> acc;
    bool first = true;
    for (int id : ids) {
        auto s = samples_of(id);  // throws on unknown id
        if (first) {
            acc = std::move(s);
            first = false;
        } else {
            std::set<std::string> inter;
            std::set_intersection(acc.begin(), acc.end(), s.begin(), s.end(),
                                  std::inserter(inter, inter.begin()));
            acc = std::move(inter);
        }
    }
    if (first) return {};  // empty id set: no constraint asked, nothing returned
    return acc;
}

const Compound* PresenceMatrix::find_compound(int id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : it->second;
}

const Compound* PresenceMatrix::find_compound_by_name(std::string_view name) const {
    std::string needle = trim(name);
    const Compound* best = nullptr;
    size_t best_len = 0;
    for (const auto& c : compounds_) {
        auto consider = [&](const std::string& candidate) {
            if (iequals(candidate, needle) && candidate.size() >= best_len) {
                best = &c;
                best_len = candidate.size();
            }
        };
        consider(c.name);
        for (const auto& a : c.alt_names) consider(a);
    }
    return best;
}

const Sample* PresenceMatrix::find_sample(std::string_view name) const {
    std::string needle = trim(name);
    for (const auto& s : samples_)
        if (iequals(s.name, needle)) return &s;
    return nullptr;
}

std::vector<std::string> PresenceMatrix::sample_names_of_class(SampleClass klass) const {
    std::vector<std::string> out;
    for (const auto& s : samples_)
        if (s.klass == klass) out.push_back(s.name);
    return out;
}

nlohmann::json PresenceMatrix::to_json() const {
    nlohmann::json j;
    j["compounds"] = nlohmann::json::array();
    for (const auto& c : compounds_) {
        nlohmann::json jc;
        jc["id"] = c.id;
        jc["name"] = c.name;
        jc["alt_names"] = c.alt_names;
        if (c.molecular_weight) jc["molecular_weight"] = *c.molecular_weight;
        if (c.rt1) jc["rt1"] = *c.rt1;
        if (c.rt2) jc["rt2"] = *c.rt2;
        if (c.mz) jc["mz"] = *c.mz;
        j["compounds"].push_back(jc);
    }
    j["samples"] = nlohmann::json::array();
    for (const auto& s : samples_) {
        nlohmann::json js;
        js["name"] = s.name;
        js["class"] = to_string(s.klass);
        if (s.subtype) js["subtype"] = *s.subtype;
        j["samples"].push_back(js);
    }
    j["presence"] = nlohmann::json::array();
    for (const auto& [id, name] : presence_) j["presence"].push_back({id, name});
    return j;
}

PresenceMatrix PresenceMatrix::from_json(const nlohmann::json& j) {
    std::vector<Compound> compounds;
    for (const auto& jc : j.at("compounds")) {
        Compound c;
        c.id = jc.at("id").get<int>();
        c.name = jc.at("name").get<std::string>();
        c.alt_names = jc.value("alt_names", std::vector<std::string>{});
        if (jc.contains("molecular_weight")) c.molecular_weight = jc["molecular_weight"].get<double>();
        if (jc.contains("rt1")) c.rt1 = jc["rt1"].get<double>();
        if (jc.contains("rt2")) c.rt2 = jc["rt2"].get<double>();
        if (jc.contains("mz")) c.mz = jc["mz"].get<double>();
        compounds.push_back(std::move(c));
    }
    std::vector<Sample> samples;
    for (const auto& js : j.at("samples")) {
        Sample s;
        s.name = js.at("name").get<std::string>();
        s.klass = sample_class_from_string(js.at("class").get<std::string>());
        if (js.contains("subtype")) s.subtype = js["subtype"].get<std::string>();
        samples.push_back(std::move(s));
    }
    std::set<std::pair<int, std::string>> presence;
    for (const auto& jp : j.at("presence"))
        presence.emplace(jp.at(0).get<int>(), jp.at(1).get<std::string>());
    return PresenceMatrix(std::move(compounds), std::move(samples), std::move(presence));
}

bool PresenceMatrix::operator==(const PresenceMatrix& other) const {
    return compounds_ == other.compounds_ && samples_ == other.samples_ &&
           presence_ == other.presence_;
}

// ---------------------------------------------------------------------------
// Table parsing

namespace {

// Strips LaTeX formatting from a cell: \textbf{...} -> ..., escaped
// characters, math dollars, leftover braces.
std::string strip_latex(std::string cell) {
    std::string out;
    out.reserve(cell.size());
    for (size_t i = 0; i < cell.size(); ++i) {
        char c = cell[i];
        if (c == '\\') {
            size_t j = i + 1;
            while (j < cell.size() && std::isalpha(static_cast<unsigned char>(cell[j]))) ++j;
            if (j == i + 1 && j < cell.size()) {  // escaped symbol like \& \% \_
                out.push_back(cell[j]);
                ++i;
            } else {
                i = j - 1;  // skip command name; its argument braces are dropped below
            }
            continue;
        }
        if (c == '{' || c == '}' || c == '$') continue;
        out.push_back(c);
    }
    return trim(out);
}

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // data rows, cells trimmed
};

RawTable parse_latex_tabular(std::string_view text) {
    size_t begin = text.find("\\begin{tabular}");
    if (begin == std::string_view::npos) throw TableError("no \\begin{tabular} found");
    size_t open = text.find('{', begin + 15);  // column spec
    size_t close = open == std::string_view::npos ? std::string_view::npos : text.find('}', open);
    if (close == std::string_view::npos) throw TableError("malformed tabular column spec");
    size_t end = text.find("\\end{tabular}", close);
    if (end == std::string_view::npos) throw TableError("no \\end{tabular} found");
    std::string body(text.substr(close + 1, end - close - 1));

    // Drop comments and rule commands.
    std::istringstream lines(body);
    std::string line, cleaned;
    while (std::getline(lines, line)) {
        size_t pct = 0;
        while ((pct = line.find('%', pct)) != std::string::npos) {
            if (pct == 0 || line[pct - 1] != '\\') {
                line.erase(pct);
                break;
            }
            ++pct;
        }
        cleaned += line;
        cleaned += '\n';
    }
    for (const char* rule : {"\\toprule", "\\midrule", "\\bottomrule", "\\hline"}) {
        size_t pos = 0;
        while ((pos = cleaned.find(rule)) != std::string::npos) cleaned.erase(pos, std::strlen(rule));
    }

    RawTable table;
    size_t pos = 0;
    while (pos < cleaned.size()) {
        size_t rowend = cleaned.find("\\\\", pos);
        std::string rowtext(cleaned.substr(pos, rowend == std::string::npos ? std::string::npos
                                                                            : rowend - pos));
        pos = rowend == std::string::npos ? cleaned.size() : rowend + 2;
        if (trim(rowtext).empty()) continue;
        std::vector<std::string> cells;
        size_t cell_start = 0;
        for (size_t i = 0; i <= rowtext.size(); ++i) {
            bool at_sep = i < rowtext.size() && rowtext[i] == '&' &&
                          (i == 0 || rowtext[i - 1] != '\\');
            if (i == rowtext.size() || at_sep) {
                cells.push_back(strip_latex(rowtext.substr(cell_start, i - cell_start)));
                cell_start = i + 1;
            }
        }
        if (table.header.empty())
            table.header = std::move(cells);
        else
            table.rows.push_back(std::move(cells));
    }
    if (table.header.empty()) throw TableError("tabular has no header row");
    return table;
}

RawTable parse_csv(std::string_view text) {
    RawTable table;
    std::vector<std::string> cells;
    std::string cell;
    bool in_quotes = false;
    auto flush_cell = [&]() {
        cells.push_back(trim(cell));
        cell.clear();
    };
    auto flush_row = [&]() {
        flush_cell();
        bool blank = std::all_of(cells.begin(), cells.end(),
                                 [](const std::string& c) { return c.empty(); });
        if (!blank) {
            if (table.header.empty())
                table.header = cells;
            else
                table.rows.push_back(cells);
        }
        cells.clear();
    };
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            flush_cell();
        } else if (c == '\n') {
            flush_row();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    if (!cell.empty() || !cells.empty()) flush_row();
    if (table.header.empty()) throw TableError("empty table");
    return table;
}

enum class ColumnKind { Id, Name, Mw, Rt1, Rt2, Mz, Sample };

struct ColumnSpec {
    ColumnKind kind;
    Sample sample;  // valid when kind == Sample
};

ColumnSpec classify_column(const std::string& header) {
    std::string h = to_lower(trim(header));
    if (h == "id" || h == "#") return {ColumnKind::Id, {}};
    if (h == "name" || h == "compound" || h == "compound name") return {ColumnKind::Name, {}};
    if (h == "mw" || h == "molecular weight") return {ColumnKind::Mw, {}};
    if (h == "rt1" || h == "rt 1") return {ColumnKind::Rt1, {}};
    if (h == "rt2" || h == "rt 2") return {ColumnKind::Rt2, {}};
    if (h == "mz" || h == "m/z") return {ColumnKind::Mz, {}};

    // Sample columns: "Name (Class)" or "Name (Class:Subtype)".
    size_t open = header.rfind('(');
    size_t close = header.rfind(')');
    if (open != std::string::npos && close != std::string::npos && close > open) {
        std::string name = trim(header.substr(0, open));
        std::string marker = trim(header.substr(open + 1, close - open - 1));
        std::string klass = marker, subtype;
        if (size_t colon = marker.find(':'); colon != std::string::npos) {
            klass = trim(marker.substr(0, colon));
            subtype = trim(marker.substr(colon + 1));
        }
        if (!name.empty() && (iequals(klass, "meteorite") || iequals(klass, "soil"))) {
            Sample s;
            s.name = name;
            s.klass = sample_class_from_string(klass);
            if (!subtype.empty()) s.subtype = subtype;
            return {ColumnKind::Sample, std::move(s)};
        }
    }
    throw TableError("unknown column '" + header +
                     "' (sample columns must be named like \"Orgueil (Meteorite:CI1)\")");
}

std::optional<double> parse_optional_positive(const std::string& cell, int row, const std::string& col) {
    if (cell.empty() || cell == "-") return std::nullopt;
    try {
        size_t consumed = 0;
        double v = std::stod(cell, &consumed);
        if (consumed != cell.size()) throw std::invalid_argument("trailing");
        if (v <= 0.0 || !std::isfinite(v))
            throw TableError("row " + std::to_string(row) + ", column " + col +
                             ": value must be strictly positive, got '" + cell + "'");
        return v;
    } catch (const TableError&) {
        throw;
    } catch (const std::exception&) {
        throw TableError("row " + std::to_string(row) + ", column " + col +
                         ": cannot parse number '" + cell + "'");
    }
}

bool parse_presence_cell(const std::string& cell, int row, const std::string& col) {
    static const std::vector<std::string> present = {"x", "X", "1", "✓"};
    static const std::vector<std::string> absent = {"", "-", "0"};
    if (std::find(present.begin(), present.end(), cell) != present.end()) return true;
    if (std::find(absent.begin(), absent.end(), cell) != absent.end()) return false;
    throw TableError("row " + std::to_string(row) + ", column " + col +
                     ": presence marker '" + cell + "' not in {x, X, 1, ✓} or {empty, -, 0}");
}

std::vector<std::string> derive_alt_names(const std::string& name) {
    if (name.find('/') == std::string::npos) return {};
    std::vector<std::string> parts;
    std::string part;
    std::istringstream ss(name);
    while (std::getline(ss, part, '/')) {
        part = trim(part);
        if (!part.empty()) parts.push_back(part);
    }
    return parts.size() >= 2 ? parts : std::vector<std::string>{};
}

}  // namespace

PresenceMatrix parse_presence_table(std::string_view text) {
    RawTable raw = text.find("\\begin{tabular}") != std::string_view::npos
                       ? parse_latex_tabular(text)
                       : parse_csv(text);

    std::vector<ColumnSpec> columns;
    columns.reserve(raw.header.size());
    for (const auto& h : raw.header) columns.push_back(classify_column(h));

    bool has_id = false, has_name = false;
    for (const auto& c : columns) {
        has_id |= c.kind == ColumnKind::Id;
        has_name |= c.kind == ColumnKind::Name;
    }
    if (!has_id || !has_name) throw TableError("table must have id and name columns");

    std::vector<Compound> compounds;
    std::vector<Sample> samples;
    std::set<std::pair<int, std::string>> presence;
    for (const auto& c : columns)
        if (c.kind == ColumnKind::Sample) samples.push_back(c.sample);

    int row_no = 1;  // 1-based data row index, as reported in errors
    for (const auto& cells : raw.rows) {
        if (cells.size() != columns.size())
            throw TableError("row " + std::to_string(row_no) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(columns.size()));
        Compound compound;
        for (size_t i = 0; i < columns.size(); ++i) {
            const auto& col = columns[i];
            const auto& cell = cells[i];
            switch (col.kind) {
                case ColumnKind::Id: {
                    try {
                        size_t consumed = 0;
                        compound.id = std::stoi(cell, &consumed);
                        if (consumed != cell.size()) throw std::invalid_argument("trailing");
                    } catch (const std::exception&) {
                        throw TableError("row " + std::to_string(row_no) + ": bad compound id '" +
                                         cell + "'");
                    }
                    break;
                }
                case ColumnKind::Name:
                    compound.name = cell;
                    compound.alt_names = derive_alt_names(cell);
                    break;
                case ColumnKind::Mw:
                    compound.molecular_weight = parse_optional_positive(cell, row_no, "MW");
                    break;
                case ColumnKind::Rt1:
                    compound.rt1 = parse_optional_positive(cell, row_no, "RT1");
                    break;
                case ColumnKind::Rt2:
                    compound.rt2 = parse_optional_positive(cell, row_no, "RT2");
                    break;
                case ColumnKind::Mz:
                    compound.mz = parse_optional_positive(cell, row_no, "m/z");
                    break;
                case ColumnKind::Sample:
                    if (parse_presence_cell(cell, row_no, col.sample.name))
                        presence.emplace(compound.id, col.sample.name);
                    break;
            }
        }
        if (compound.name.empty())
            throw TableError("row " + std::to_string(row_no) + ": empty compound name");
        compounds.push_back(std::move(compound));
        ++row_no;
    }
    return PresenceMatrix(std::move(compounds), std::move(samples), std::move(presence));
}

// ---------------------------------------------------------------------------
// Claim extraction

namespace {

struct SampleListItem {
    std::string token;  // as written (trimmed)
};

// Splits "Orgueil, ALH 83100 and LEW 85311" into items; also handles
// "A and B", stray "and", and leading qualifiers like "like".
std::vector<SampleListItem> split_name_list(std::string_view text) {
    std::vector<SampleListItem> items;
    std::string buf(text);
    // Normalize " and " to comma for splitting.
    for (const char* conj : {" and ", " & "}) {
        size_t pos = 0;
        while ((pos = buf.find(conj)) != std::string::npos) buf.replace(pos, std::strlen(conj), ", ");
    }
    std::istringstream ss(buf);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        for (const char* lead : {"like ", "such as ", "particularly ", "including ", "e.g. ", "e.g., "}) {
            if (to_lower(item).rfind(lead, 0) == 0) item = trim(item.substr(std::strlen(lead)));
        }
        // Strip trailing class words ("LEW 85311 meteorites"); "soil" is
        // never stripped since several sample names end in it.
        for (const char* tail : {" meteorites", " meteorite", " samples", " sample"}) {
            std::string low = to_lower(item);
            std::string t(tail);
            if (low.size() > t.size() && low.compare(low.size() - t.size(), t.size(), t) == 0)
                item = trim(item.substr(0, item.size() - t.size()));
        }
        if (!item.empty()) items.push_back({item});
    }
    return items;
}

// A token looks like a plausible sample name: starts with an uppercase
// letter or digit and is not a bare stopword.
bool plausible_sample_token(const std::string& token) {
    if (token.empty()) return false;
    static const std::set<std::string> stop = {"all",  "the",  "other", "others", "both",
                                               "most", "some", "few",   "several"};
    if (stop.count(to_lower(token))) return false;
    unsigned char c0 = static_cast<unsigned char>(token[0]);
    return std::isupper(c0) != 0 || std::isdigit(c0) != 0;
}

struct Segment {
    Polarity polarity = Polarity::Present;
    bool only = false;
    bool all = false;  // "all soil samples" style quantifier seen
    std::string text;  // text following the marker, up to the next marker
};

struct MarkerHit {
    size_t pos;
    size_t len;
    Polarity polarity;
    bool only;
};

const std::vector<std::pair<std::string, Polarity>>& marker_table() {
    // Longest-first so "but absent in" wins over "absent in".
    static const std::vector<std::pair<std::string, Polarity>> markers = {
        {"notably absent in", Polarity::Absent},
        {"but absent in", Polarity::Absent},
        {"absent in", Polarity::Absent},
        {"absent from", Polarity::Absent},
        {"but not in", Polarity::Absent},
        {"not found in", Polarity::Absent},
        {"not detected in", Polarity::Absent},
        {"not present in", Polarity::Absent},
        {"not in", Polarity::Absent},
        {"found exclusively in", Polarity::Present},
        {"found together in", Polarity::Present},
        {"found mainly in", Polarity::Present},
        {"found only in", Polarity::Present},
        {"found in", Polarity::Present},
        {"exclusively in", Polarity::Present},
        {"present in", Polarity::Present},
        {"detected in", Polarity::Present},
        {"occurs in", Polarity::Present},
        {"occur in", Polarity::Present},
        {"appears in", Polarity::Present},
        {"appear in", Polarity::Present},
        {"seen in", Polarity::Present},
        {"restricted to", Polarity::Present},
        {"limited to", Polarity::Present},
        {"in", Polarity::Present},
    };
    return markers;
}

bool marker_only_flag(const std::string& marker) {
    return marker.find("only") != std::string::npos ||
           marker.find("exclusively") != std::string::npos ||
           marker.find("restricted") != std::string::npos ||
           marker.find("limited") != std::string::npos;
}

std::vector<Segment> segment_clause(const std::string& clause) {
    std::vector<MarkerHit> hits;
    std::string low = to_lower(clause);
    for (const auto& [marker, pol] : marker_table()) {
        size_t from = 0;
        while (true) {
            size_t pos = low.find(marker, from);
            if (pos == std::string::npos) break;
            if (bounded_at(clause, pos, marker.size())) {
                bool covered = std::any_of(hits.begin(), hits.end(), [&](const MarkerHit& h) {
                    return pos >= h.pos && pos < h.pos + h.len;
                });
                if (!covered) hits.push_back({pos, marker.size(), pol, marker_only_flag(marker)});
            }
            from = pos + 1;
        }
    }
    std::sort(hits.begin(), hits.end(), [](const MarkerHit& a, const MarkerHit& b) {
        return a.pos < b.pos;
    });
    // Drop bare "in" hits that start inside an earlier marker's span
    // (e.g. the "in" inside "absent in").
    std::vector<MarkerHit> kept;
    for (const auto& h : hits) {
        if (!kept.empty() && h.pos < kept.back().pos + kept.back().len) continue;
        kept.push_back(h);
    }
    std::vector<Segment> segments;
    for (size_t i = 0; i < kept.size(); ++i) {
        Segment seg;
        seg.polarity = kept[i].polarity;
        seg.only = kept[i].only;
        size_t start = kept[i].pos + kept[i].len;
        size_t end = i + 1 < kept.size() ? kept[i + 1].pos : clause.size();
        seg.text = trim(clause.substr(start, end - start));
        // "only" can also precede the marker: "found only in" is caught by
        // the marker itself; "only found in" is caught here.
        size_t before = kept[i].pos;
        std::string prefix = to_lower(clause.substr(before >= 12 ? before - 12 : 0,
                                                    std::min<size_t>(before, 12)));
        if (prefix.find("only") != std::string::npos) seg.only = true;
        segments.push_back(std::move(seg));
    }
    return segments;
}

// Extracts "ID 14" / "IDs 2, 8, 15" / "ID 2,8" numbers in order of
// appearance, deduplicated.
std::vector<int> extract_ids(const std::string& text) {
    std::vector<int> out;
    std::string low = to_lower(text);
    size_t pos = 0;
    while ((pos = low.find("id", pos)) != std::string::npos) {
        if (!bounded_at(text, pos, 2) && !(pos + 3 <= text.size() && low.compare(pos, 3, "ids") == 0 &&
                                           bounded_at(text, pos, 3))) {
            ++pos;
            continue;
        }
        size_t cursor = pos + 2;
        if (cursor < text.size() && (low[cursor] == 's')) ++cursor;
        // Require the "ID"/"IDs" token to stand alone.
        if (pos > 0 && is_word_char(text[pos - 1])) {
            ++pos;
            continue;
        }
        if (cursor < text.size() && is_word_char(text[cursor])) {
            ++pos;
            continue;
        }
        // Consume a list of numbers: "14", "2, 8, 15", "12,13", "4, 17, and 18".
        bool any = false;
        while (cursor < text.size()) {
            size_t save = cursor;
            while (cursor < text.size() && (text[cursor] == ' ' || text[cursor] == ':')) ++cursor;
            if (any) {
                if (cursor < text.size() && text[cursor] == ',') {
                    ++cursor;
                    while (cursor < text.size() && text[cursor] == ' ') ++cursor;
                }
                if (low.compare(cursor, 4, "and ") == 0) cursor += 4;
                while (cursor < text.size() && text[cursor] == ' ') ++cursor;
            }
            size_t num_start = cursor;
            while (cursor < text.size() && std::isdigit(static_cast<unsigned char>(text[cursor])))
                ++cursor;
            if (cursor == num_start) {
                cursor = save;
                break;
            }
            // A number followed by a word character is not an id ("ID 2a").
            if (cursor < text.size() && is_word_char(text[cursor])) {
                cursor = save;
                break;
            }
            int v = std::stoi(text.substr(num_start, cursor - num_start));
            if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
            any = true;
        }
        pos = cursor > pos ? cursor : pos + 1;
    }
    return out;
}

struct ClassPhrase {
    std::optional<SampleClass> klass;
    bool all = false;
    size_t consumed = 0;  // chars of segment text consumed by the phrase
};

ClassPhrase match_class_phrase(const std::string& text) {
    std::string low = to_lower(text);
    ClassPhrase cp;
    size_t pos = 0;
    auto eat = [&](const char* word) {
        size_t len = std::strlen(word);
        if (low.compare(pos, len, word) == 0) {
            pos += len;
            while (pos < low.size() && low[pos] == ' ') ++pos;
            return true;
        }
        return false;
    };
    if (eat("all ")) cp.all = true;
    eat("the ");
    eat("other ");
    if (eat("meteorites") || eat("meteorite")) {
        cp.klass = SampleClass::Meteorite;
    } else if (eat("soils") || eat("soil")) {
        cp.klass = SampleClass::Soil;
    } else {
        return {};
    }
    if (!eat("samples")) eat("sample");
    cp.consumed = pos;
    return cp;
}

}  // namespace

ClaimRefs extract_claim_refs(const PresenceMatrix& vocabulary, std::string_view key_datapoints) {
    ClaimRefs refs;
    std::string text(key_datapoints);
    if (trim(text).empty()) return refs;

    // Record every vocabulary compound name mentioned anywhere.
    for (const auto& c : vocabulary.compounds()) {
        auto note_name = [&](const std::string& n) {
            if (ifind_bounded(text, n) != std::string_view::npos) refs.compound_names.insert(c.name);
        };
        note_name(c.name);
        for (const auto& a : c.alt_names) note_name(a);
    }
    for (const auto& s : vocabulary.samples()) {
        if (ifind_bounded(text, s.name) != std::string_view::npos) refs.sample_names.insert(s.name);
    }

    // Clause split on ';' — ids carry forward only into clauses of a
    // sentence that name none themselves.
    std::vector<std::string> clauses;
    {
        std::string cur;
        for (char c : text) {
            if (c == ';') {
                clauses.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        clauses.push_back(cur);
    }

    std::vector<int> carried_ids;
    for (const auto& clause : clauses) {
        std::vector<int> ids = extract_ids(clause);
        for (int id : ids) refs.compound_ids.insert(id);
        if (ids.empty()) ids = carried_ids;
        else carried_ids = ids;

        // Compound refs for this clause: ids if any, else vocabulary
        // compound names appearing in the clause.
        std::vector<CompoundRef> comp_refs;
        for (int id : ids) comp_refs.push_back({id, ""});
        if (comp_refs.empty()) {
            for (const auto& c : vocabulary.compounds()) {
                auto mentioned = [&](const std::string& n) {
                    return ifind_bounded(clause, n) != std::string_view::npos;
                };
                bool hit = mentioned(c.name);
                for (const auto& a : c.alt_names) hit = hit || mentioned(a);
                if (hit) comp_refs.push_back({std::nullopt, c.name});
            }
        }
        if (comp_refs.empty()) continue;

        for (const Segment& seg : segment_clause(clause)) {
            std::vector<std::string> sample_tokens;
            bool class_expansion = false;
            std::string seg_text = seg.text;

            ClassPhrase cp = match_class_phrase(seg_text);
            if (cp.klass) {
                std::string rest = trim(seg_text.substr(cp.consumed));
                if (!rest.empty() && rest.front() == '(') {
                    // "meteorites (Orgueil, ALH 83100, ...)": the list wins.
                    size_t close = rest.find(')');
                    seg_text = rest.substr(1, close == std::string::npos ? std::string::npos
                                                                         : close - 1);
                } else if (!rest.empty() && plausible_sample_token(rest)) {
                    // "meteorites ALH 83100, LON 94101, ...": bare list.
                    seg_text = rest;
                } else {
                    // Bare class phrase. Expand to the whole class for
                    // Absent claims and "all ..." quantifiers; a bare
                    // Present class claim is too vague to assert.
                    if (cp.all || seg.polarity == Polarity::Absent) {
                        for (const auto& n : vocabulary.sample_names_of_class(*cp.klass))
                            sample_tokens.push_back(n);
                        class_expansion = true;
                    } else if (seg.only) {
                        // "found only in soil samples": assert absence
                        // everywhere outside the class.
                        SampleClass other = *cp.klass == SampleClass::Soil ? SampleClass::Meteorite
                                                                           : SampleClass::Soil;
                        for (const auto& n : vocabulary.sample_names_of_class(other))
                            for (const auto& cr : comp_refs)
                                refs.assertions.push_back({cr, n, Polarity::Absent});
                        continue;
                    } else {
                        continue;
                    }
                    seg_text.clear();
                }
            }

            if (!class_expansion) {
                // Trim a trailing parenthetical that is not a sample list
                // ("(possible terpenes)") and cut at clause-final verbs.
                for (const auto& item : split_name_list(seg_text)) {
                    std::string token = item.token;
                    // "(...)" wrapping: unwrap single parenthesized token.
                    if (!token.empty() && token.front() == '(') token = trim(token.substr(1));
                    if (!token.empty() && token.back() == ')') token = trim(token.substr(0, token.size() - 1));
                    if (!plausible_sample_token(token)) continue;
                    // Skip tokens that are vocabulary compound names: lists
                    // can mix compounds and samples.
                    if (vocabulary.find_compound_by_name(token) && !vocabulary.find_sample(token))
                        continue;
                    ClassPhrase nested = match_class_phrase(token);
                    if (nested.klass && nested.consumed >= token.size()) {
                        for (const auto& n : vocabulary.sample_names_of_class(*nested.klass))
                            sample_tokens.push_back(n);
                        continue;
                    }
                    sample_tokens.push_back(token);
                }
            }

            for (const auto& token : sample_tokens) {
                const Sample* s = vocabulary.find_sample(token);
                std::string canonical = s ? s->name : token;
                refs.sample_names.insert(canonical);
                for (const auto& cr : comp_refs)
                    refs.assertions.push_back({cr, canonical, seg.polarity});
            }

            if (seg.only && seg.polarity == Polarity::Present && !sample_tokens.empty() &&
                !class_expansion) {
                // "found only in A and B": absent everywhere else.
                std::set<std::string> named;
                for (const auto& t : sample_tokens) {
                    const Sample* s = vocabulary.find_sample(t);
                    named.insert(to_lower(s ? s->name : t));
                }
                for (const auto& s : vocabulary.samples()) {
                    if (named.count(to_lower(s.name))) continue;
                    for (const auto& cr : comp_refs)
                        refs.assertions.push_back({cr, s.name, Polarity::Absent});
                }
            }
        }
    }
    return refs;
}

GroundingReport verify_grounding(const PresenceMatrix& matrix, const ClaimRefs& refs) {
    GroundingReport report;
    std::set<std::string> unresolved;

    auto resolve_compound = [&](const CompoundRef& cr) -> std::optional<int> {
        if (cr.id) {
            if (matrix.has_compound(*cr.id)) return *cr.id;
            unresolved.insert("ID " + std::to_string(*cr.id));
            return std::nullopt;
        }
        if (const Compound* c = matrix.find_compound_by_name(cr.name)) return c->id;
        unresolved.insert(cr.name);
        return std::nullopt;
    };

    for (const auto& a : refs.assertions) {
        auto id = resolve_compound(a.compound);
        const Sample* s = matrix.find_sample(a.sample);
        if (!s) unresolved.insert(a.sample);
        if (!id || !s) continue;
        bool pair_present = matrix.present(*id, s->name);
        bool ok = a.polarity == Polarity::Present ? pair_present : !pair_present;
        (ok ? report.supported : report.violated).push_back(a);
    }
    for (int id : refs.compound_ids)
        if (!matrix.has_compound(id)) unresolved.insert("ID " + std::to_string(id));
    for (const auto& n : refs.sample_names)
        if (!matrix.find_sample(n)) unresolved.insert(n);
    for (const auto& n : refs.compound_names)
        if (!matrix.find_compound_by_name(n)) unresolved.insert(n);

    report.unresolved.assign(unresolved.begin(), unresolved.end());
    return report;
}

}  // namespace hypogen::specdata
