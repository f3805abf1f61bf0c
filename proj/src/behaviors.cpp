#include "advm/behaviors.hpp"

#include <algorithm>

namespace advm {

namespace {

// folds in rendering order
Datum fold_inputs(std::vector<Datum> inputs) {
    std::sort(inputs.begin(), inputs.end(),
              [](const Datum& a, const Datum& b) { return a.render() < b.render(); });
    Datum out;
    for (const auto& d : inputs) {
        if (!out.type && d.type) out.type = d.type;
        for (const auto& [k, v] : d.fields) out.fields[k] = v;
    }
    return out;
}

Value add_values(const Value& a, const Value& b, const std::string& field) {
    if (!a.is_numeric() || !b.is_numeric()) throw BehaviorError("add: field '" + field + "' is not numeric");
    if (a.kind() == Value::Kind::Int && b.kind() == Value::Kind::Int)
        return Value(std::get<std::int64_t>(a.data) + std::get<std::int64_t>(b.data));
    return Value(a.as_decimal() + b.as_decimal());
}

}  // namespace

OpaqueBehaviorBinding make_stub(const BehaviorSpec& spec) {
    OpaqueBehaviorBinding b;
    b.name = spec.name;
    b.body = [spec](const std::vector<Datum>& inputs, std::size_t outputs) {
        Datum base = fold_inputs(inputs);
        switch (spec.kind) {
        case BehaviorSpec::Kind::Identity: break;
        case BehaviorSpec::Kind::Const: base.fields = spec.record; break;
        case BehaviorSpec::Kind::Set: base.fields[spec.field] = spec.value; break;
        case BehaviorSpec::Kind::Add: {
            auto it = base.fields.find(spec.field);
            Value current = it == base.fields.end() ? Value(0) : it->second;
            base.fields[spec.field] = add_values(current, spec.value, spec.field);
            break;
        }
        }
        return std::vector<Datum>(outputs, base);
    };
    return b;
}

void BehaviorRegistry::bind(OpaqueBehaviorBinding binding) {
    std::string name = binding.name;
    bindings_.insert_or_assign(std::move(name), std::move(binding));
}

const OpaqueBehaviorBinding* BehaviorRegistry::find(std::string_view name) const {
    auto it = bindings_.find(name);
    return it == bindings_.end() ? nullptr : &it->second;
}

BehaviorRegistry BehaviorRegistry::from_models(const ModelSet& models) {
    BehaviorRegistry r;
    for (const auto& [name, spec] : models.behaviors) r.bind(make_stub(spec));
    return r;
}

}  // namespace advm
