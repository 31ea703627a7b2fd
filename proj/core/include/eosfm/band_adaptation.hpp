#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eosfm/tensor.hpp"

namespace eos {

/// Ordered sensor band layout. Each band is a "family/name" token
/// (S2/B04, S1/VV, RGB/R, ...). Two specs are equal iff their ordered
/// band lists are equal.
struct BandSpec {
    std::vector<std::string> bands;

    BandSpec() = default;
    explicit BandSpec(std::vector<std::string> b);

    int count() const { return static_cast<int>(bands.size()); }
    bool operator==(const BandSpec& o) const { return bands == o.bands; }
    bool operator!=(const BandSpec& o) const { return !(*this == o); }

    std::string to_string() const;            // comma-separated tokens
    static BandSpec parse(const std::string& s);
};

/// Channel-gather rule from an available layout to a required layout.
/// indices are 0-based into available.bands; duplicates allowed.
struct AdaptationRule {
    std::string rule_id;
    BandSpec available;
    BandSpec required;
    std::vector<int> indices;

    void validate() const;
    bool is_identity() const;
    static AdaptationRule identity(const BandSpec& spec);
};

/// Reserved id for the implicit identity rule generated when the input
/// spec already equals an encoder's required spec.
inline constexpr const char* kIdentityRuleId = "identity";

/// One (encoder, rule) pair of the ensemble forward pass.
struct Branch {
    std::string encoder_id;
    std::string rule_id;

    bool operator==(const Branch& o) const {
        return encoder_id == o.encoder_id && rule_id == o.rule_id;
    }
    std::string key() const { return encoder_id + "|" + rule_id; }
};

/// Write-once-then-read-many rule registry; iteration order is
/// registration order.
class RuleRegistry {
public:
    const std::string& register_rule(AdaptationRule rule);

    /// All rules mapping input_spec -> required_spec, in registration
    /// order; the implicit identity rule comes first when the specs match.
    std::vector<AdaptationRule> applicable_rules(const BandSpec& input_spec,
                                                 const BandSpec& required_spec) const;

    /// Look up by id; the identity id resolves against the given spec.
    AdaptationRule resolve(const std::string& rule_id, const BandSpec& spec_for_identity) const;

    const std::vector<AdaptationRule>& rules() const { return rules_; }
    size_t size() const { return rules_.size(); }

    /// Rule file: one rule per line,
    ///   rule_id | available_spec | required_spec | i0,i1,...
    std::string serialize() const;
    void save(const std::filesystem::path& p) const;
    static RuleRegistry parse(const std::string& text);
    static RuleRegistry load(const std::filesystem::path& p);

    bool operator==(const RuleRegistry& o) const;

private:
    std::vector<AdaptationRule> rules_;
};

/// Pure channel gather: output channel j = input channel rule.indices[j].
Tensor apply_rule(const Tensor& image, const AdaptationRule& rule);

}  // namespace eos
