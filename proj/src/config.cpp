#include "blfuse/config.hpp"

#include <cmath>

namespace blfuse {

ConfigReader::ConfigReader(const nlohmann::json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw ValidationError(context_ + ": expected a JSON object");
}

bool ConfigReader::has(const std::string& key) const { return j_.contains(key); }

void ConfigReader::fail(const std::string& key, const std::string& what) const {
    throw ValidationError(context_ + ": key '" + key + "' " + what);
}

const nlohmann::json& ConfigReader::at(const std::string& key) {
    if (!j_.contains(key)) fail(key, "is required");
    used_.insert(key);
    return j_.at(key);
}

const nlohmann::json& ConfigReader::raw(const std::string& key) { return at(key); }

double ConfigReader::number(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_number()) fail(key, "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "must be finite");
    return d;
}

double ConfigReader::number_or(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
}

long long ConfigReader::integer(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_number_integer()) fail(key, "must be an integer");
    return v.get<long long>();
}

long long ConfigReader::integer_or(const std::string& key, long long fallback) {
    return has(key) ? integer(key) : fallback;
}

std::uint64_t ConfigReader::seed(const std::string& key) {
    const auto& v = at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    fail(key, "must be a non-negative integer");
}

std::string ConfigReader::text(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_string()) fail(key, "must be a string");
    return v.get<std::string>();
}

std::string ConfigReader::text_or(const std::string& key, const std::string& fallback) {
    return has(key) ? text(key) : fallback;
}

Vec ConfigReader::vector(const std::string& key) { return vec_from_json(at(key), context_ + " key '" + key + "'"); }

Mat ConfigReader::matrix(const std::string& key) { return mat_from_json(at(key), context_ + " key '" + key + "'"); }

std::vector<std::string> ConfigReader::strings(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_array()) fail(key, "must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) fail(key, "must be an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

void ConfigReader::finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
        if (!used_.count(it.key())) throw ValidationError(context_ + ": unknown key '" + it.key() + "'");
    }
}

nlohmann::json vec_to_json(const Vec& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

nlohmann::json mat_to_json(const Mat& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(std::move(row));
    }
    return out;
}

Vec vec_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw ValidationError(what + ": expected an array of numbers");
    Vec v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) {
        if (!j[static_cast<std::size_t>(i)].is_number()) throw ValidationError(what + ": entries must be numbers");
        v(i) = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

Mat mat_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw ValidationError(what + ": expected a non-empty array of rows");
    const auto rows = static_cast<Index>(j.size());
    const auto cols = j[0].is_array() ? static_cast<Index>(j[0].size()) : 0;
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const Vec row = vec_from_json(j[static_cast<std::size_t>(i)], what);
        if (row.size() != cols) throw ValidationError(what + ": rows have different lengths");
        m.row(i) = row.transpose();
    }
    return m;
}

}  // namespace blfuse
