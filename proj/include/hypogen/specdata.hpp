#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace hypogen::specdata {

enum class SampleClass { Meteorite, Soil };

std::string to_string(SampleClass c);
SampleClass sample_class_from_string(std::string_view s);

/// One identified compound row of the input table. Peak metadata is
/// optional; some rows carry only an id and a name.
struct Compound {
    int id = 0;
    std::string name;
    std::vector<std::string> alt_names;  // slash-named compounds split, e.g. "phenanthrene/anthracene"
    std::optional<double> molecular_weight;
    std::optional<double> rt1;  // seconds
    std::optional<double> rt2;  // seconds
    std::optional<double> mz;

    bool operator==(const Compound&) const = default;
};

struct Sample {
    std::string name;
    SampleClass klass = SampleClass::Meteorite;
    std::optional<std::string> subtype;  // e.g. "CM2", "CI1"

    bool operator==(const Sample&) const = default;
};

class TableError : public std::runtime_error {
public:
    explicit TableError(const std::string& what) : std::runtime_error(what) {}
};

class UnknownCompoundError : public std::runtime_error {
public:
    explicit UnknownCompoundError(int id)
        : std::runtime_error("unknown compound id " + std::to_string(id)), id_(id) {}
    int id() const { return id_; }

private:
    int id_;
};

/// Boolean compound-by-sample occurrence table. Immutable after
/// construction; safe for unrestricted shared reads.
class PresenceMatrix {
public:
    PresenceMatrix(std::vector<Compound> compounds, std::vector<Sample> samples,
                   std::set<std::pair<int, std::string>> presence);

    const std::vector<Compound>& compounds() const { return compounds_; }
    const std::vector<Sample>& samples() const { return samples_; }
    const std::set<std::pair<int, std::string>>& presence() const { return presence_; }

    bool has_compound(int id) const;
    bool present(int compound_id, const std::string& sample_name) const;

    /// Exactly the sample names paired with the compound. Throws
    /// UnknownCompoundError for ids not in the matrix.
    std::set<std::string> samples_of(int compound_id) const;

    /// Ids occurring in at least one sample and only in samples of the
    /// given class.
    std::set<int> exclusive_compounds(SampleClass klass) const;

    /// Intersection of samples_of over the given ids.
    std::set<std::string> co_occurring(const std::set<int>& ids) const;

    /// Case-insensitive lookups. Compound lookup also consults alt names
    /// and prefers the longest-name match when names overlap.
    const Compound* find_compound(int id) const;
    const Compound* find_compound_by_name(std::string_view name) const;
    const Sample* find_sample(std::string_view name) const;

    std::vector<std::string> sample_names_of_class(SampleClass klass) const;

    nlohmann::json to_json() const;
    static PresenceMatrix from_json(const nlohmann::json& j);

    bool operator==(const PresenceMatrix& other) const;

private:
    std::vector<Compound> compounds_;
    std::vector<Sample> samples_;
    std::set<std::pair<int, std::string>> presence_;
    std::map<int, const Compound*> by_id_;
};

/// Parses a presence table from either LaTeX tabular source or CSV
/// (auto-detected). Sample columns carry their class in the header:
/// "Orgueil (Meteorite:CI1)", "Lignite Soil (Soil)".
PresenceMatrix parse_presence_table(std::string_view text);

enum class Polarity { Present, Absent };

std::string to_string(Polarity p);

/// A compound reference inside a claim: either a numeric id or a name
/// token, exactly as it appeared in the text.
struct CompoundRef {
    std::optional<int> id;
    std::string name;  // empty when id is set and no name was attached

    bool operator==(const CompoundRef&) const = default;
};

struct Assertion {
    CompoundRef compound;
    std::string sample;
    Polarity polarity = Polarity::Present;

    bool operator==(const Assertion&) const = default;
};

std::string to_string(const Assertion& a);

/// Structured form of a key_datapoints string. The sets record every
/// reference found in the text; assertions are the compound-sample pairs
/// the text actually commits to.
struct ClaimRefs {
    std::set<int> compound_ids;
    std::set<std::string> compound_names;
    std::set<std::string> sample_names;
    std::vector<Assertion> assertions;

    bool empty() const {
        return compound_ids.empty() && compound_names.empty() && sample_names.empty() &&
               assertions.empty();
    }
};

/// Best-effort, conservative extraction: references that cannot be read
/// with confidence yield no assertion (they surface later as unresolved),
/// never a guessed one.
ClaimRefs extract_claim_refs(const PresenceMatrix& vocabulary, std::string_view key_datapoints);

struct GroundingReport {
    std::vector<Assertion> supported;
    std::vector<Assertion> violated;
    std::vector<std::string> unresolved;  // name/id tokens not found in the matrix

    bool clean() const { return violated.empty(); }
};

/// Checks every assertion against the presence pairs. Present assertions
/// are supported iff the pair exists, Absent assertions iff it does not.
/// Assertions whose compound or sample does not resolve contribute their
/// tokens to `unresolved` and are counted in neither list.
GroundingReport verify_grounding(const PresenceMatrix& matrix, const ClaimRefs& refs);

}  // namespace hypogen::specdata
