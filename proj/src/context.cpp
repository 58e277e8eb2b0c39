#include "hypogen/context.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace hypogen::context {

long approx_tokens(std::string_view text) {
    return static_cast<long>((text.size() + 3) / 4);
}

std::string ContextBundle::render() const {
    std::string out;
    for (size_t i = 0; i < documents.size(); ++i) {
        if (i) out += "\n\n";
        out += documents[i].body;
    }
    return out;
}

namespace {

std::string first_heading(const std::string& body) {
    std::istringstream ss(body);
    std::string line;
    while (std::getline(ss, line)) {
        size_t hashes = 0;
        while (hashes < line.size() && line[hashes] == '#') ++hashes;
        if (hashes >= 1 && hashes <= 6 && hashes < line.size() && line[hashes] == ' ') {
            std::string title = line.substr(hashes + 1);
            size_t b = title.find_first_not_of(" \t");
            size_t e = title.find_last_not_of(" \t\r");
            if (b != std::string::npos) return title.substr(b, e - b + 1);
        }
    }
    return "";
}

}  // namespace

std::vector<ContextDocument> load_documents(const std::vector<std::string>& paths) {
    std::vector<ContextDocument> docs;
    docs.reserve(paths.size());
    for (const auto& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ContextError("cannot read context document: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        ContextDocument doc;
        doc.path = path;
        doc.body = ss.str();
        if (doc.body.empty()) throw ContextError("context document is empty: " + path);
        doc.title = first_heading(doc.body);
        if (doc.title.empty()) doc.title = std::filesystem::path(path).stem().string();
        doc.approx_tokens = approx_tokens(doc.body);
        docs.push_back(std::move(doc));
    }
    return docs;
}

ContextBundle assemble_context(std::vector<ContextDocument> docs, long budget) {
    if (budget <= 0) throw ContextError("context budget must be positive");
    long total = std::accumulate(docs.begin(), docs.end(), 0L,
                                 [](long acc, const ContextDocument& d) { return acc + d.approx_tokens; });
    if (total > budget) {
        // Report the smallest suffix whose removal would bring the bundle
        // under budget; the caller curates the list, we never truncate.
        long overage = total - budget;
        long removed = 0;
        std::vector<std::string> offenders;
        for (auto it = docs.rbegin(); it != docs.rend() && removed < overage; ++it) {
            removed += it->approx_tokens;
            offenders.push_back(it->title + " (" + std::to_string(it->approx_tokens) + " tokens)");
        }
        std::string msg = "context exceeds budget by " + std::to_string(overage) +
                          " tokens (total " + std::to_string(total) + ", budget " +
                          std::to_string(budget) + "); dropping this suffix would fit: ";
        for (size_t i = 0; i < offenders.size(); ++i) {
            if (i) msg += ", ";
            msg += offenders[offenders.size() - 1 - i];
        }
        throw ContextError(msg);
    }
    ContextBundle bundle;
    bundle.documents = std::move(docs);
    bundle.total_tokens = total;
    bundle.budget = budget;
    bundle.empty_warning = bundle.documents.empty();
    return bundle;
}

}  // namespace hypogen::context
