#include "kgmark/store.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "kgmark/error.hpp"

namespace kgmark::api {

bool valid_key(const std::string& s)
{
    if (s.empty() || s.size() > 128 || s.front() == '.') return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-')) return false;
    return true;
}

namespace {

void check_key(const std::string& collection, const std::string& id)
{
    if (!valid_key(collection) || !valid_key(id)) fail(ErrorCode::validation, "invalid store key '" + collection + "/" + id + "'");
}

} // namespace

void MemoryStore::put(const std::string& collection, const std::string& id, const nlohmann::json& record)
{
    check_key(collection, id);
    std::lock_guard lock(mu_);
    data_[collection][id] = record;
}

std::optional<nlohmann::json> MemoryStore::get(const std::string& collection, const std::string& id) const
{
    std::lock_guard lock(mu_);
    auto c = data_.find(collection);
    if (c == data_.end()) return std::nullopt;
    auto r = c->second.find(id);
    if (r == c->second.end()) return std::nullopt;
    return r->second;
}

std::vector<std::pair<std::string, nlohmann::json>> MemoryStore::list(const std::string& collection) const
{
    std::lock_guard lock(mu_);
    std::vector<std::pair<std::string, nlohmann::json>> out;
    if (auto c = data_.find(collection); c != data_.end())
        for (const auto& kv : c->second) out.push_back(kv);
    return out;
}

void MemoryStore::erase(const std::string& collection, const std::string& id)
{
    std::lock_guard lock(mu_);
    if (auto c = data_.find(collection); c != data_.end()) c->second.erase(id);
}

FileStore::FileStore(std::filesystem::path root) : root_(std::move(root))
{
    std::filesystem::create_directories(root_);
}

std::filesystem::path FileStore::path_of(const std::string& collection, const std::string& id) const
{
    check_key(collection, id);
    return root_ / collection / (id + ".json");
}

void FileStore::put(const std::string& collection, const std::string& id, const nlohmann::json& record)
{
    auto path = path_of(collection, id);
    std::lock_guard lock(mu_);
    std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::unavailable, "cannot write " + tmp.string());
        out << record.dump(2) << '\n';
        if (!out.flush()) fail(ErrorCode::unavailable, "cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::optional<nlohmann::json> FileStore::get(const std::string& collection, const std::string& id) const
{
    auto path = path_of(collection, id);
    std::lock_guard lock(mu_);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::parse, "corrupt record " + path.string() + ": " + e.what());
    }
}

std::vector<std::pair<std::string, nlohmann::json>> FileStore::list(const std::string& collection) const
{
    std::vector<std::string> ids;
    {
        std::lock_guard lock(mu_);
        auto dir = root_ / collection;
        if (!std::filesystem::is_directory(dir)) return {};
        for (const auto& e : std::filesystem::directory_iterator(dir)) {
            if (!e.is_regular_file() || e.path().extension() != ".json") continue;
            ids.push_back(e.path().stem().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    std::vector<std::pair<std::string, nlohmann::json>> out;
    for (const auto& id : ids)
        if (auto r = get(collection, id)) out.emplace_back(id, std::move(*r));
    return out;
}

void FileStore::erase(const std::string& collection, const std::string& id)
{
    auto path = path_of(collection, id);
    std::lock_guard lock(mu_);
    std::filesystem::remove(path);
}

} // namespace kgmark::api
