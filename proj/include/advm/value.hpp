#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace advm {

/// Exact fixed-point decimal: `units * 10^-scale`.
///
/// Guard outcomes must not depend on binary floating point, so every
/// numeric comparison goes through this type (integers are scale 0).
class Decimal {
public:
    constexpr Decimal() = default;
    constexpr Decimal(std::int64_t units, std::uint8_t scale) : units_(units), scale_(scale) {}
    static constexpr Decimal from_int(std::int64_t v) { return Decimal(v, 0); }

    /// Parses `[-]digits[.digits]`; throws std::invalid_argument.
    static Decimal parse(std::string_view text);

    std::int64_t units() const { return units_; }
    std::uint8_t scale() const { return scale_; }

    std::string to_string() const;
    Decimal operator+(const Decimal& other) const;

    friend std::strong_ordering operator<=>(const Decimal& a, const Decimal& b);
    friend bool operator==(const Decimal& a, const Decimal& b) { return (a <=> b) == 0; }

private:
    std::int64_t units_ = 0;
    std::uint8_t scale_ = 0;
};

/// Scalar field value carried in token records.
struct Value {
    enum class Kind { Int, Decimal, String, Bool };

    std::variant<std::int64_t, Decimal, std::string, bool> data;

    Value() : data(std::int64_t{0}) {}
    Value(std::int64_t v) : data(v) {}
    Value(int v) : data(std::int64_t{v}) {}
    Value(Decimal v) : data(v) {}
    Value(std::string v) : data(std::move(v)) {}
    Value(const char* v) : data(std::string(v)) {}
    Value(bool v) : data(v) {}

    Kind kind() const { return static_cast<Kind>(data.index()); }
    bool is_numeric() const { return kind() == Kind::Int || kind() == Kind::Decimal; }
    Decimal as_decimal() const;

    /// Literal syntax: 12, 1.50, "text", true.
    std::string to_literal() const;

    friend bool operator==(const Value&, const Value&) = default;
};

/// Flat record of named scalar fields, sorted by key.
using Record = std::map<std::string, Value, std::less<>>;

std::string render_record(const Record& record);

/// A value crossing an activity or behavior boundary. No type and no
/// fields stands for a control (NULL-typed) value.
struct Datum {
    std::optional<std::string> type;
    Record fields;

    bool is_control() const { return !type && fields.empty(); }

    /// `Type{a:1,b:"x"}`, `{a:1}` for untyped data, `null` for control.
    std::string render() const;

    friend bool operator==(const Datum&, const Datum&) = default;
};

/// Parses a record literal `{k:v, ...}`. Bare words are string values.
Record parse_record_literal(std::string_view text);

/// Parses a single scalar literal (number, quoted string, true/false,
/// or a bare word taken as a string).
Value parse_scalar_literal(std::string_view text);

}  // namespace advm
