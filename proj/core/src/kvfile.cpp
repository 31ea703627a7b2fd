#include "eosfm/kvfile.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "eosfm/errors.hpp"

namespace eos {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    if (trim(s).empty()) return out;
    for (const auto& tok : split(s, ',')) {
        std::string t = trim(tok);
        if (t.empty()) throw ParseError("empty element in integer list: '" + s + "'");
        size_t pos = 0;
        int v = std::stoi(t, &pos);
        if (pos != t.size()) throw ParseError("bad integer '" + t + "'");
        out.push_back(v);
    }
    return out;
}

std::string fmt_float(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

void KvFile::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
}

void KvFile::set_int(const std::string& key, int64_t v) { set(key, std::to_string(v)); }

void KvFile::set_double(const std::string& key, double v) { set(key, fmt_float(v, 17)); }

void KvFile::set_ints(const std::string& key, const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    set(key, s);
}

bool KvFile::has(const std::string& key) const { return values_.count(key) != 0; }

const std::string& KvFile::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ManifestError("missing key '" + key + "'");
    return it->second;
}

std::string KvFile::get_or(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
}

int64_t KvFile::get_int(const std::string& key) const {
    try {
        return std::stoll(get(key));
    } catch (const std::invalid_argument&) {
        throw ManifestError("key '" + key + "' is not an integer");
    }
}

double KvFile::get_double(const std::string& key) const {
    try {
        return std::stod(get(key));
    } catch (const std::invalid_argument&) {
        throw ManifestError("key '" + key + "' is not a number");
    }
}

std::vector<int> KvFile::get_ints(const std::string& key) const { return parse_int_list(get(key)); }

std::string KvFile::serialize() const {
    std::string out;
    for (const auto& k : order_) {
        out += k;
        out += " = ";
        out += values_.at(k);
        out += "\n";
    }
    return out;
}

void KvFile::save(const std::filesystem::path& p) const {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    f << serialize();
}

KvFile KvFile::parse(const std::string& text) {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ManifestError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
        kv.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return kv;
}

KvFile KvFile::load(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw ManifestError("cannot read " + p.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

}  // namespace eos
