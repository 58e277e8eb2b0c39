#pragma once

// Include after doctest.h: the helpers use REQUIRE.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hypogen/specdata.hpp"

namespace testsupport {

inline std::filesystem::path source_dir() { return std::filesystem::path(HYPOGEN_SOURCE_DIR); }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }
inline std::filesystem::path prompts_dir() { return source_dir() / "share" / "prompts"; }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

/// Unique scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static std::atomic<unsigned> counter{0};
        auto base = std::filesystem::temp_directory_path();
        path = base / ("hypogen_test_" + std::to_string(::getpid()) + "_" +
                       std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

inline hypogen::specdata::PresenceMatrix fixture_matrix() {
    return hypogen::specdata::parse_presence_table(read_file(data_dir() / "presence_matrix.tex"));
}

// --- Independent oracles -----------------------------------------------

/// Exhaustive-enumeration oracle for exclusive_compounds: walks every
/// (compound, sample) cell directly.
inline std::set<int> oracle_exclusive(const hypogen::specdata::PresenceMatrix& m,
                                      hypogen::specdata::SampleClass klass) {
    std::set<int> out;
    for (const auto& c : m.compounds()) {
        int in_class = 0, out_of_class = 0;
        for (const auto& s : m.samples()) {
            if (!m.presence().count({c.id, s.name})) continue;
            if (s.klass == klass)
                ++in_class;
            else
                ++out_of_class;
        }
        if (in_class >= 1 && out_of_class == 0) out.insert(c.id);
    }
    return out;
}

/// Exhaustive-enumeration oracle for co_occurring.
inline std::set<std::string> oracle_co_occurring(const hypogen::specdata::PresenceMatrix& m,
                                                 const std::set<int>& ids) {
    std::set<std::string> out;
    if (ids.empty()) return out;
    for (const auto& s : m.samples()) {
        bool all = true;
        for (int id : ids)
            if (!m.presence().count({id, s.name})) all = false;
        if (all) out.insert(s.name);
    }
    return out;
}

/// Random small matrix for property tests (up to 6 compounds x 4 samples).
inline hypogen::specdata::PresenceMatrix random_matrix(std::mt19937& rng) {
    using namespace hypogen::specdata;
    std::uniform_int_distribution<int> ncomp(1, 6), nsamp(1, 4), coin(0, 1);
    int cs = ncomp(rng), ss = nsamp(rng);
    std::vector<Compound> compounds;
    for (int i = 1; i <= cs; ++i) compounds.push_back({i, "compound" + std::to_string(i), {}, {}, {}, {}, {}});
    std::vector<Sample> samples;
    for (int i = 1; i <= ss; ++i) {
        Sample s;
        s.name = "sample" + std::to_string(i);
        s.klass = coin(rng) ? SampleClass::Meteorite : SampleClass::Soil;
        samples.push_back(s);
    }
    std::set<std::pair<int, std::string>> presence;
    for (const auto& c : compounds)
        for (const auto& s : samples)
            if (coin(rng)) presence.insert({c.id, s.name});
    return PresenceMatrix(std::move(compounds), std::move(samples), std::move(presence));
}

/// Two-pass population standard deviation, kept deliberately naive.
inline double oracle_population_std(const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    double mean = sum / static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

}  // namespace testsupport
