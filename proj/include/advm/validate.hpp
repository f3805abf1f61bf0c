#pragma once

#include "advm/model.hpp"

#include <string>
#include <vector>

namespace advm {

/// One finding. Codes:
///  E1 control-node cycle             E2 fork and join on one stable-to-stable path
///  E3 missing or misplaced pins      E4 pin edge cardinality
///  E5 decision outgoing edges        E6 unresolved behavior reference
///  E7 control-node arity             E8 expression references unavailable data
///  W1 decision guards not provably mutually exclusive
struct Diagnostic {
    std::string code;
    std::vector<std::string> elements;
    std::string message;

    std::string to_string() const;
    friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct ValidationReport {
    std::vector<Diagnostic> errors;
    std::vector<Diagnostic> warnings;

    bool accepted() const { return errors.empty(); }
    bool has_error(std::string_view code) const;
    bool has_warning(std::string_view code) const;
    friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

ValidationReport validate(const ActivityModel& model, const ModelSet& registry);

/// True when the two guards can be shown never to hold for the same token:
/// equality on one field with different literals, or disjoint numeric
/// intervals on one field. `otherwise` is disjoint from everything.
bool provably_exclusive(const Expr& a, const Expr& b);

}  // namespace advm
