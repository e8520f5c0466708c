#pragma once

// Flat key-table text format:
//
//   # comment
//   [section]
//   key = 1.5
//   name = "text"
//   flag = true
//   list = [0.25, 0.5, [1, 2], "a"]
//
// Keys before the first section header live in the unnamed section "".

#include "parametrix/core/types.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace parametrix {

/// Parse or validation error at a 1-based line and column.
class ConfigError : public ArgumentError {
public:
    ConfigError(const std::string& what, int line, int column)
        : ArgumentError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line), column_(column) {}
    [[nodiscard]] int line() const { return line_; }
    [[nodiscard]] int column() const { return column_; }

private:
    int line_, column_;
};

struct ConfigValue {
    enum class Kind { number, boolean, string, array };
    Kind kind = Kind::number;
    double number = 0.0;
    bool boolean = false;
    std::string text;
    std::vector<ConfigValue> items;
    int line = 0, column = 0;

    static ConfigValue of(double v) {
        ConfigValue c;
        c.number = v;
        return c;
    }
    static ConfigValue of(bool v) {
        ConfigValue c;
        c.kind = Kind::boolean;
        c.boolean = v;
        return c;
    }
    static ConfigValue of(std::string v) {
        ConfigValue c;
        c.kind = Kind::string;
        c.text = std::move(v);
        return c;
    }
    static ConfigValue list(std::vector<ConfigValue> v) {
        ConfigValue c;
        c.kind = Kind::array;
        c.items = std::move(v);
        return c;
    }

    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(what, line, column); }

    [[nodiscard]] double as_number() const {
        if (kind != Kind::number) fail("expected a number");
        return number;
    }
    [[nodiscard]] int as_int() const {
        const double v = as_number();
        if (v != std::floor(v) || std::abs(v) > 2e9) fail("expected an integer");
        return static_cast<int>(v);
    }
    [[nodiscard]] bool as_bool() const {
        if (kind != Kind::boolean) fail("expected true or false");
        return boolean;
    }
    [[nodiscard]] const std::string& as_string() const {
        if (kind != Kind::string) fail("expected a quoted string");
        return text;
    }
    [[nodiscard]] const std::vector<ConfigValue>& as_array() const {
        if (kind != Kind::array) fail("expected an array");
        return items;
    }
    [[nodiscard]] std::vector<double> as_numbers() const {
        std::vector<double> out;
        for (const auto& v : as_array()) out.push_back(v.as_number());
        return out;
    }
    [[nodiscard]] std::vector<std::string> as_strings() const {
        std::vector<std::string> out;
        for (const auto& v : as_array()) out.push_back(v.as_string());
        return out;
    }
    [[nodiscard]] std::vector<std::vector<double>> as_points() const {
        std::vector<std::vector<double>> out;
        for (const auto& v : as_array()) out.push_back(v.as_numbers());
        return out;
    }
};

struct ConfigEntry {
    std::string key;
    ConfigValue value;
    int line = 0, column = 0;
};

struct ConfigSection {
    std::string name;
    std::vector<ConfigEntry> entries;
    int line = 0;

    [[nodiscard]] const ConfigEntry* find(const std::string& key) const {
        for (const auto& e : entries)
            if (e.key == key) return &e;
        return nullptr;
    }
};

class ConfigTable {
public:
    std::vector<ConfigSection> sections;

    [[nodiscard]] const ConfigSection* section(const std::string& name) const {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }

    ConfigSection& ensure(const std::string& name) {
        for (auto& s : sections)
            if (s.name == name) return s;
        sections.push_back({name, {}, 0});
        return sections.back();
    }

    void set(const std::string& sec, const std::string& key, ConfigValue v) {
        ConfigSection& s = ensure(sec);
        for (auto& e : s.entries)
            if (e.key == key) {
                e.value = std::move(v);
                return;
            }
        s.entries.push_back({key, std::move(v), 0, 0});
    }
};

namespace detail {

class ConfigParser {
public:
    explicit ConfigParser(std::istream& in) : in_(in) {}

    ConfigTable parse() {
        ConfigTable table;
        ConfigSection* current = &table.ensure("");
        std::string raw;
        while (std::getline(in_, raw)) {
            ++line_;
            if (!raw.empty() && raw.back() == '\r') raw.pop_back();
            text_ = raw;
            pos_ = 0;
            skip_space();
            if (at_end() || peek() == '#') continue;
            if (peek() == '[') {
                const int col = column();
                ++pos_;
                skip_space();
                const std::string name = identifier("section name");
                skip_space();
                expect(']');
                skip_space();
                if (!at_end() && peek() != '#') error("unexpected text after section header");
                if (table.section(name) && table.section(name)->line > 0) throw ConfigError("duplicate section [" + name + "]", line_, col);
                current = &table.ensure(name);
                current->line = line_;
                continue;
            }
            const int key_col = column();
            const std::string key = identifier("key");
            skip_space();
            expect('=');
            skip_space();
            if (current->find(key)) throw ConfigError("duplicate key '" + key + "'", line_, key_col);
            ConfigValue v = value();
            skip_space();
            if (!at_end() && peek() != '#') error("unexpected text after value");
            current->entries.push_back({key, std::move(v), line_, key_col});
        }
        return table;
    }

private:
    [[nodiscard]] bool at_end() const { return pos_ >= text_.size(); }
    [[nodiscard]] char peek() const { return text_[pos_]; }
    [[nodiscard]] int column() const { return static_cast<int>(pos_) + 1; }

    [[noreturn]] void error(const std::string& what) const { throw ConfigError(what, line_, column()); }

    void skip_space() {
        while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void expect(char c) {
        if (at_end() || peek() != c) error(std::string("expected '") + c + "'");
        ++pos_;
    }

    std::string identifier(const char* what) {
        const std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-' ||
                             peek() == '.'))
            ++pos_;
        if (pos_ == start) error(std::string("expected ") + what);
        return text_.substr(start, pos_ - start);
    }

    ConfigValue value() {
        if (at_end()) error("missing value");
        ConfigValue v;
        v.line = line_;
        v.column = column();
        const char c = peek();
        if (c == '"') {
            ++pos_;
            std::string s;
            while (true) {
                if (at_end()) error("unterminated string");
                char ch = text_[pos_++];
                if (ch == '"') break;
                if (ch == '\\') {
                    if (at_end()) error("unterminated escape");
                    ch = text_[pos_++];
                    if (ch == 'n') ch = '\n';
                    else if (ch != '"' && ch != '\\') error("unknown escape");
                }
                s.push_back(ch);
            }
            v.kind = ConfigValue::Kind::string;
            v.text = std::move(s);
            return v;
        }
        if (c == '[') {
            ++pos_;
            v.kind = ConfigValue::Kind::array;
            skip_space();
            if (!at_end() && peek() == ']') {
                ++pos_;
                return v;
            }
            while (true) {
                skip_space();
                v.items.push_back(value());
                skip_space();
                if (at_end()) error("unterminated array");
                if (peek() == ',') {
                    ++pos_;
                    continue;
                }
                if (peek() == ']') {
                    ++pos_;
                    return v;
                }
                error("expected ',' or ']'");
            }
        }
        if (text_.compare(pos_, 4, "true") == 0) {
            pos_ += 4;
            v.kind = ConfigValue::Kind::boolean;
            v.boolean = true;
            return v;
        }
        if (text_.compare(pos_, 5, "false") == 0) {
            pos_ += 5;
            v.kind = ConfigValue::Kind::boolean;
            return v;
        }
        const char* first = text_.data() + pos_;
        const char* last = text_.data() + text_.size();
        if (*first == '+') ++first;
        double num = 0.0;
        auto [ptr, ec] = std::from_chars(first, last, num);
        if (ec != std::errc() || ptr == first) error("expected a value (number, string, boolean or array)");
        pos_ = static_cast<std::size_t>(ptr - text_.data());
        v.number = num;
        return v;
    }

    std::istream& in_;
    std::string text_;
    std::size_t pos_ = 0;
    int line_ = 0;
};

inline void write_value(std::ostream& os, const ConfigValue& v) {
    switch (v.kind) {
        case ConfigValue::Kind::number: {
            char buf[64];
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v.number);
            (void)ec;
            os.write(buf, ptr - buf);
            break;
        }
        case ConfigValue::Kind::boolean: os << (v.boolean ? "true" : "false"); break;
        case ConfigValue::Kind::string:
            os << '"';
            for (char c : v.text) {
                if (c == '"' || c == '\\') os << '\\';
                if (c == '\n') {
                    os << "\\n";
                    continue;
                }
                os << c;
            }
            os << '"';
            break;
        case ConfigValue::Kind::array:
            os << '[';
            for (std::size_t i = 0; i < v.items.size(); ++i) {
                if (i) os << ", ";
                write_value(os, v.items[i]);
            }
            os << ']';
            break;
    }
}

}  // namespace detail

inline ConfigTable parse_config(std::istream& in) { return detail::ConfigParser(in).parse(); }

inline ConfigTable parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline ConfigTable load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config file '" + path + "'");
    return parse_config(in);
}

inline std::string serialize_config(const ConfigTable& table) {
    std::ostringstream os;
    bool first = true;
    for (const auto& sec : table.sections) {
        if (sec.entries.empty() && sec.name.empty()) continue;
        if (!sec.name.empty()) {
            if (!first) os << "\n";
            os << "[" << sec.name << "]\n";
        }
        for (const auto& e : sec.entries) {
            os << e.key << " = ";
            detail::write_value(os, e.value);
            os << "\n";
        }
        first = false;
    }
    return os.str();
}

}  // namespace parametrix
