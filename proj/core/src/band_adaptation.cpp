#include "eosfm/band_adaptation.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "eosfm/errors.hpp"
#include "eosfm/kvfile.hpp"

namespace eos {

BandSpec::BandSpec(std::vector<std::string> b) : bands(std::move(b)) {
    if (bands.empty()) throw InvalidArgument("BandSpec: at least one band required");
    std::set<std::string> seen;
    for (const auto& id : bands) {
        if (id.empty()) throw InvalidArgument("BandSpec: empty band identifier");
        if (!seen.insert(id).second) throw InvalidArgument("BandSpec: duplicate band '" + id + "'");
    }
}

std::string BandSpec::to_string() const {
    std::string s;
    for (size_t i = 0; i < bands.size(); ++i) {
        if (i) s += ",";
        s += bands[i];
    }
    return s;
}

BandSpec BandSpec::parse(const std::string& s) {
    std::vector<std::string> bands;
    for (const auto& tok : split(s, ',')) {
        std::string t = trim(tok);
        if (t.empty()) throw ParseError("BandSpec: empty band token in '" + s + "'");
        bands.push_back(t);
    }
    return BandSpec(bands);
}

void AdaptationRule::validate() const {
    if (rule_id.empty()) throw InvalidArgument("rule id must be non-empty");
    if (rule_id.find('|') != std::string::npos)
        throw InvalidArgument("rule id must not contain '|'");
    if (static_cast<int>(indices.size()) != required.count())
        throw InvalidArgument("rule '" + rule_id + "': index count " + std::to_string(indices.size()) +
                              " != required band count " + std::to_string(required.count()));
    for (int idx : indices)
        if (idx < 0 || idx >= available.count())
            throw InvalidArgument("rule '" + rule_id + "': index " + std::to_string(idx) +
                                  " out of range [0," + std::to_string(available.count()) + ")");
}

bool AdaptationRule::is_identity() const {
    if (available != required) return false;
    for (size_t j = 0; j < indices.size(); ++j)
        if (indices[j] != static_cast<int>(j)) return false;
    return true;
}

AdaptationRule AdaptationRule::identity(const BandSpec& spec) {
    AdaptationRule r;
    r.rule_id = kIdentityRuleId;
    r.available = spec;
    r.required = spec;
    r.indices.resize(spec.count());
    for (int j = 0; j < spec.count(); ++j) r.indices[j] = j;
    return r;
}

const std::string& RuleRegistry::register_rule(AdaptationRule rule) {
    rule.validate();
    if (rule.rule_id == kIdentityRuleId)
        throw InvalidArgument("rule id 'identity' is reserved for implicit identity rules");
    for (const auto& r : rules_)
        if (r.rule_id == rule.rule_id)
            throw InvalidArgument("duplicate rule id '" + rule.rule_id + "'");
    rules_.push_back(std::move(rule));
    return rules_.back().rule_id;
}

std::vector<AdaptationRule> RuleRegistry::applicable_rules(const BandSpec& input_spec,
                                                           const BandSpec& required_spec) const {
    std::vector<AdaptationRule> out;
    if (input_spec == required_spec) out.push_back(AdaptationRule::identity(input_spec));
    for (const auto& r : rules_)
        if (r.available == input_spec && r.required == required_spec) out.push_back(r);
    return out;
}

AdaptationRule RuleRegistry::resolve(const std::string& rule_id,
                                     const BandSpec& spec_for_identity) const {
    if (rule_id == kIdentityRuleId) return AdaptationRule::identity(spec_for_identity);
    for (const auto& r : rules_)
        if (r.rule_id == rule_id) return r;
    throw InvalidArgument("unknown rule id '" + rule_id + "'");
}

std::string RuleRegistry::serialize() const {
    std::string out;
    for (const auto& r : rules_) {
        out += r.rule_id;
        out += " | ";
        out += r.available.to_string();
        out += " | ";
        out += r.required.to_string();
        out += " | ";
        for (size_t j = 0; j < r.indices.size(); ++j) {
            if (j) out += ",";
            out += std::to_string(r.indices[j]);
        }
        out += "\n";
    }
    return out;
}

void RuleRegistry::save(const std::filesystem::path& p) const {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    f << serialize();
}

RuleRegistry RuleRegistry::parse(const std::string& text) {
    RuleRegistry reg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto fields = split(t, '|');
        if (fields.size() != 4)
            throw ParseError("rule file line " + std::to_string(lineno) + ": expected 4 '|' fields");
        AdaptationRule r;
        r.rule_id = trim(fields[0]);
        r.available = BandSpec::parse(fields[1]);
        r.required = BandSpec::parse(fields[2]);
        r.indices = parse_int_list(fields[3]);
        reg.register_rule(std::move(r));
    }
    return reg;
}

RuleRegistry RuleRegistry::load(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw ParseError("cannot read rule file " + p.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

bool RuleRegistry::operator==(const RuleRegistry& o) const {
    if (rules_.size() != o.rules_.size()) return false;
    for (size_t i = 0; i < rules_.size(); ++i) {
        const auto& a = rules_[i];
        const auto& b = o.rules_[i];
        if (a.rule_id != b.rule_id || a.available != b.available || a.required != b.required ||
            a.indices != b.indices)
            return false;
    }
    return true;
}

Tensor apply_rule(const Tensor& image, const AdaptationRule& rule) {
    bool batched = image.ndim() == 4;
    if (!batched && image.ndim() != 3)
        throw ShapeError("apply_rule: expected CxHxW or BxCxHxW, got " + image.shape_str());
    const int c_axis = batched ? 1 : 0;
    if (image.shape[c_axis] != rule.available.count())
        throw ShapeError("apply_rule: image has " + std::to_string(image.shape[c_axis]) +
                         " channels, rule '" + rule.rule_id + "' expects " +
                         std::to_string(rule.available.count()));
    const int batch = batched ? image.shape[0] : 1;
    const int in_c = image.shape[c_axis];
    const int h = image.shape[c_axis + 1], w = image.shape[c_axis + 2];
    const int out_c = static_cast<int>(rule.indices.size());
    std::vector<int> out_shape = batched ? std::vector<int>{batch, out_c, h, w}
                                         : std::vector<int>{out_c, h, w};
    Tensor out(out_shape);
    const int64_t plane = static_cast<int64_t>(h) * w;
    for (int b = 0; b < batch; ++b) {
        const float* src = image.data.data() + static_cast<int64_t>(b) * in_c * plane;
        float* dst = out.data.data() + static_cast<int64_t>(b) * out_c * plane;
        for (int j = 0; j < out_c; ++j)
            std::copy_n(src + static_cast<int64_t>(rule.indices[j]) * plane, plane, dst + static_cast<int64_t>(j) * plane);
    }
    return out;
}

}  // namespace eos
