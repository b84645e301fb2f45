#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace kgmark::api {

/// Document store keyed by (collection, id); records are JSON objects.
/// Implementations must be safe to call from several threads.
class Store {
public:
    virtual ~Store() = default;
    virtual void put(const std::string& collection, const std::string& id, const nlohmann::json& record) = 0;
    virtual std::optional<nlohmann::json> get(const std::string& collection, const std::string& id) const = 0;
    /// All records of a collection, ordered by id.
    virtual std::vector<std::pair<std::string, nlohmann::json>> list(const std::string& collection) const = 0;
    virtual void erase(const std::string& collection, const std::string& id) = 0;
};

class MemoryStore : public Store {
public:
    void put(const std::string& collection, const std::string& id, const nlohmann::json& record) override;
    std::optional<nlohmann::json> get(const std::string& collection, const std::string& id) const override;
    std::vector<std::pair<std::string, nlohmann::json>> list(const std::string& collection) const override;
    void erase(const std::string& collection, const std::string& id) override;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::map<std::string, nlohmann::json>> data_;
};

/// One pretty-printed file per record: <root>/<collection>/<id>.json, replaced
/// atomically via a temporary file and rename.
class FileStore : public Store {
public:
    explicit FileStore(std::filesystem::path root);
    void put(const std::string& collection, const std::string& id, const nlohmann::json& record) override;
    std::optional<nlohmann::json> get(const std::string& collection, const std::string& id) const override;
    std::vector<std::pair<std::string, nlohmann::json>> list(const std::string& collection) const override;
    void erase(const std::string& collection, const std::string& id) override;

private:
    std::filesystem::path path_of(const std::string& collection, const std::string& id) const;

    std::filesystem::path root_;
    mutable std::mutex mu_;
};

/// Ids and collection names usable as file names: [A-Za-z0-9._-], not starting with '.'.
bool valid_key(const std::string& s);

} // namespace kgmark::api
