#include "advm/value.hpp"

#include <cctype>
#include <charconv>
#include <limits>

namespace advm {

namespace {

__int128 pow10(unsigned n) {
    __int128 r = 1;
    while (n-- > 0) r *= 10;
    return r;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

Decimal Decimal::parse(std::string_view text) {
    std::string_view s = text;
    bool negative = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    if (s.empty()) throw std::invalid_argument("empty number");
    __int128 units = 0;
    int scale = -1;
    bool any_digit = false;
    for (char c : s) {
        if (c == '.') {
            if (scale >= 0) throw std::invalid_argument("malformed number: " + std::string(text));
            scale = 0;
            continue;
        }
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw std::invalid_argument("malformed number: " + std::string(text));
        any_digit = true;
        units = units * 10 + (c - '0');
        if (scale >= 0) ++scale;
        if (units > std::numeric_limits<std::int64_t>::max() || scale > 18)
            throw std::invalid_argument("number out of range: " + std::string(text));
    }
    if (!any_digit) throw std::invalid_argument("malformed number: " + std::string(text));
    if (scale < 0) scale = 0;
    auto v = static_cast<std::int64_t>(units);
    return Decimal(negative ? -v : v, static_cast<std::uint8_t>(scale));
}

std::string Decimal::to_string() const {
    if (scale_ == 0) return std::to_string(units_);
    bool negative = units_ < 0;
    // magnitude as unsigned to survive INT64_MIN
    auto mag = negative ? -static_cast<unsigned long long>(units_) : static_cast<unsigned long long>(units_);
    std::string digits = std::to_string(mag);
    if (digits.size() <= scale_) digits.insert(0, scale_ - digits.size() + 1, '0');
    digits.insert(digits.size() - scale_, 1, '.');
    return negative ? "-" + digits : digits;
}

Decimal Decimal::operator+(const Decimal& other) const {
    std::uint8_t scale = std::max(scale_, other.scale_);
    __int128 a = static_cast<__int128>(units_) * pow10(scale - scale_);
    __int128 b = static_cast<__int128>(other.units_) * pow10(scale - other.scale_);
    __int128 sum = a + b;
    if (sum > std::numeric_limits<std::int64_t>::max() || sum < std::numeric_limits<std::int64_t>::min())
        throw std::overflow_error("decimal overflow");
    return Decimal(static_cast<std::int64_t>(sum), scale);
}

std::strong_ordering operator<=>(const Decimal& a, const Decimal& b) {
    std::uint8_t scale = std::max(a.scale_, b.scale_);
    __int128 x = static_cast<__int128>(a.units_) * pow10(scale - a.scale_);
    __int128 y = static_cast<__int128>(b.units_) * pow10(scale - b.scale_);
    if (x < y) return std::strong_ordering::less;
    if (x > y) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

Decimal Value::as_decimal() const {
    if (auto* i = std::get_if<std::int64_t>(&data)) return Decimal::from_int(*i);
    if (auto* d = std::get_if<Decimal>(&data)) return *d;
    throw std::logic_error("value is not numeric");
}

std::string Value::to_literal() const {
    switch (kind()) {
    case Kind::Int: return std::to_string(std::get<std::int64_t>(data));
    case Kind::Decimal: return std::get<Decimal>(data).to_string();
    case Kind::Bool: return std::get<bool>(data) ? "true" : "false";
    case Kind::String: {
        std::string out = "\"";
        for (char c : std::get<std::string>(data)) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
        }
        return out + "\"";
    }
    }
    return {};
}

std::string render_record(const Record& record) {
    std::string out = "{";
    bool first = true;
    for (const auto& [key, value] : record) {
        if (!first) out += ',';
        first = false;
        out += key;
        out += ':';
        out += value.to_literal();
    }
    return out + "}";
}

std::string Datum::render() const {
    if (is_control()) return "null";
    return type.value_or("") + render_record(fields);
}

namespace {

class LiteralReader {
public:
    explicit LiteralReader(std::string_view text) : text_(text) {}

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool at_end() {
        skip_ws();
        return pos_ >= text_.size();
    }
    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }
    void expect(char c) {
        if (peek() != c)
            throw std::invalid_argument("expected '" + std::string(1, c) + "' at offset " + std::to_string(pos_) +
                                        " in `" + std::string(text_) + "`");
        ++pos_;
    }

    std::string word() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && is_word_char(text_[pos_])) ++pos_;
        if (start == pos_) throw std::invalid_argument("expected identifier in `" + std::string(text_) + "`");
        return std::string(text_.substr(start, pos_ - start));
    }

    Value scalar() {
        char c = peek();
        if (c == '"' || c == '\'') {
            char quote = c;
            ++pos_;
            std::string out;
            while (pos_ < text_.size() && text_[pos_] != quote) {
                if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
                out += text_[pos_++];
            }
            if (pos_ >= text_.size()) throw std::invalid_argument("unterminated string");
            ++pos_;
            return Value(std::move(out));
        }
        std::size_t start = pos_;
        if (c == '-' || c == '+' || std::isdigit(static_cast<unsigned char>(c))) {
            ++pos_;
            while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
                ++pos_;
            auto num = text_.substr(start, pos_ - start);
            if (num.find('.') == std::string_view::npos) {
                std::int64_t v = 0;
                auto [ptr, ec] = std::from_chars(num.data() + (num.front() == '+' ? 1 : 0), num.data() + num.size(), v);
                if (ec != std::errc() || ptr != num.data() + num.size())
                    throw std::invalid_argument("malformed integer: " + std::string(num));
                return Value(v);
            }
            return Value(Decimal::parse(num));
        }
        std::string w = word();
        if (w == "true") return Value(true);
        if (w == "false") return Value(false);
        return Value(std::move(w));
    }

    Record record() {
        Record out;
        expect('{');
        if (peek() == '}') {
            ++pos_;
            return out;
        }
        while (true) {
            std::string key = word();
            expect(':');
            out[key] = scalar();
            char c = peek();
            if (c == ',') {
                ++pos_;
                continue;
            }
            expect('}');
            return out;
        }
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

Record parse_record_literal(std::string_view text) {
    LiteralReader reader(trim(text));
    Record r = reader.record();
    if (!reader.at_end()) throw std::invalid_argument("trailing text after record literal: `" + std::string(text) + "`");
    return r;
}

Value parse_scalar_literal(std::string_view text) {
    LiteralReader reader(trim(text));
    Value v = reader.scalar();
    if (!reader.at_end()) throw std::invalid_argument("trailing text after literal: `" + std::string(text) + "`");
    return v;
}

}  // namespace advm
