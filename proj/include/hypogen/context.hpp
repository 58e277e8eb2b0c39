#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hypogen::context {

class ContextError : public std::runtime_error {
public:
    explicit ContextError(const std::string& what) : std::runtime_error(what) {}
};

struct ContextDocument {
    std::string path;
    std::string title;
    std::string body;
    long approx_tokens = 0;  // ceil(chars / 4)

    bool operator==(const ContextDocument&) const = default;
};

struct ContextBundle {
    std::vector<ContextDocument> documents;  // input order preserved
    long total_tokens = 0;
    long budget = 0;
    bool empty_warning = false;  // no documents: hypotheses risk being overly general

    /// Document bodies joined with blank lines, in order.
    std::string render() const;
};

long approx_tokens(std::string_view text);

/// Reads UTF-8 Markdown files in the given order. Title is the first
/// heading, else the file stem. Missing or empty files are errors naming
/// the path.
std::vector<ContextDocument> load_documents(const std::vector<std::string>& paths);

/// All-or-nothing: documents either all fit the budget or the call fails,
/// listing the smallest suffix whose removal would fit and the overage in
/// tokens. Never truncates.
ContextBundle assemble_context(std::vector<ContextDocument> docs, long budget);

}  // namespace hypogen::context
