#pragma once

#include "advm/model.hpp"
#include "advm/value.hpp"

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace advm {

/// Host-provided body of an elementary task.
struct OpaqueBehaviorBinding {
    std::string name;
    std::optional<std::size_t> in_arity;   ///< absent: any
    std::optional<std::size_t> out_arity;  ///< absent: any
    /// Input data values -> one value per output pin (`outputs` of them).
    std::function<std::vector<Datum>(const std::vector<Datum>& inputs, std::size_t outputs)> body;
};

class BehaviorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stub body for a declared `behavior`. Inputs are sorted by their rendering
/// and folded into one record (later inputs override earlier fields; the
/// first typed input gives the type), the stub transforms it, and every
/// output pin receives a copy.
OpaqueBehaviorBinding make_stub(const BehaviorSpec& spec);

class BehaviorRegistry {
public:
    void bind(OpaqueBehaviorBinding binding);
    const OpaqueBehaviorBinding* find(std::string_view name) const;

    /// Stubs for every behavior declared in the model set.
    static BehaviorRegistry from_models(const ModelSet& models);

private:
    std::map<std::string, OpaqueBehaviorBinding, std::less<>> bindings_;
};

}  // namespace advm
