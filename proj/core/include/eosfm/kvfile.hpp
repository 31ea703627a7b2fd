#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace eos {

/// The structured-text dialect used by every manifest and config file:
/// one `key = value` per line, `#` comments, keys kept in insertion order
/// so serialization round-trips deterministically.
class KvFile {
public:
    void set(const std::string& key, const std::string& value);
    void set_int(const std::string& key, int64_t v);
    void set_double(const std::string& key, double v);
    void set_ints(const std::string& key, const std::vector<int>& v);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& dflt) const;
    int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::vector<int> get_ints(const std::string& key) const;

    const std::vector<std::string>& keys() const { return order_; }

    std::string serialize() const;
    void save(const std::filesystem::path& p) const;

    static KvFile parse(const std::string& text);
    static KvFile load(const std::filesystem::path& p);

private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
std::vector<int> parse_int_list(const std::string& s);

/// Fixed-format float for CSV output; identical input -> identical bytes.
std::string fmt_float(double v, int precision = 6);

}  // namespace eos
