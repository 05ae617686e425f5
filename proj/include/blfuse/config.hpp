#pragma once

#include "blfuse/linalg.hpp"

#include <json.hpp>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace blfuse {

/// Typed access to a JSON object that remembers which keys were read, so
/// finish() can reject anything unknown. Every error names the key.
class ConfigReader {
public:
    ConfigReader(const nlohmann::json& j, std::string context);

    bool has(const std::string& key) const;
    const nlohmann::json& raw(const std::string& key);

    double number(const std::string& key);
    double number_or(const std::string& key, double fallback);
    long long integer(const std::string& key);
    long long integer_or(const std::string& key, long long fallback);
    std::uint64_t seed(const std::string& key);
    std::string text(const std::string& key);
    std::string text_or(const std::string& key, const std::string& fallback);
    Vec vector(const std::string& key);
    Mat matrix(const std::string& key);
    std::vector<std::string> strings(const std::string& key);

    /// Throws ValidationError on the first unrecognised key.
    void finish() const;

private:
    const nlohmann::json& at(const std::string& key);
    [[noreturn]] void fail(const std::string& key, const std::string& what) const;

    const nlohmann::json& j_;
    std::string context_;
    std::set<std::string> used_;
};

nlohmann::json vec_to_json(const Vec& v);
nlohmann::json mat_to_json(const Mat& m);
Vec vec_from_json(const nlohmann::json& j, const std::string& what);
Mat mat_from_json(const nlohmann::json& j, const std::string& what);

}  // namespace blfuse
