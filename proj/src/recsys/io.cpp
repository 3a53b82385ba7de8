#include "rah/recsys.hpp"

#include <cstring>
#include <fstream>

namespace rah {

namespace {

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw DecodeError("model file truncated");
    return v;
}

template <class T>
void put_vec(std::ostream& os, const std::vector<T>& v) {
    put<std::uint64_t>(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
std::vector<T> get_vec(std::istream& is, std::uint64_t limit) {
    const auto n = get<std::uint64_t>(is);
    if (n > limit) throw DecodeError("model file has an implausible array length");
    std::vector<T> v(n);
    if (n && !is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T))))
        throw DecodeError("model file truncated");
    return v;
}

constexpr std::uint64_t kMaxArray = 1ULL << 32;

} // namespace

void Recommender::write(std::ostream& os) const {
    os.write(kModelMagic, sizeof kModelMagic);
    put<std::uint32_t>(os, kModelVersion);
    put<std::uint8_t>(os, static_cast<std::uint8_t>(kind()));
    put<std::uint64_t>(os, n_users_);
    put<std::uint64_t>(os, n_items_);
    put_vec(os, loss_history_);
    write_body(os);
}

void Recommender::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        write(os);
        if (!os) throw RunError("cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

void MFModel::write_body(std::ostream& os) const {
    put<std::int32_t>(os, dim_);
    put_vec(os, theta_);
}

void FMModel::write_body(std::ostream& os) const {
    put<std::int32_t>(os, dim_);
    put<std::uint64_t>(os, n_domains_);
    put_vec(os, item_domain_);
    put_vec(os, theta_);
}

void KNNModel::write_body(std::ostream& os) const {
    put<std::int32_t>(os, k_);
    for (const auto& likes : user_likes_) put_vec(os, likes);
    for (const auto& nb : neighbors_) {
        put<std::uint64_t>(os, nb.size());
        for (const auto& [j, s] : nb) {
            put<std::uint32_t>(os, j);
            put<double>(os, s);
        }
    }
}

void PopularityModel::write_body(std::ostream& os) const { put_vec(os, counts_); }

std::unique_ptr<Recommender> read_model(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0) throw DecodeError("not a model file");
    const auto version = get<std::uint32_t>(is);
    if (version != kModelVersion)
        throw MigrationError("model file version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kModelVersion) + ")");
    const auto kind = get<std::uint8_t>(is);
    const auto n_users = get<std::uint64_t>(is);
    const auto n_items = get<std::uint64_t>(is);
    if (n_users > kMaxArray || n_items > kMaxArray) throw DecodeError("model file has implausible dimensions");
    auto history = get_vec<double>(is, kMaxArray);

    std::unique_ptr<Recommender> out;
    switch (static_cast<ModelKind>(kind)) {
    case ModelKind::MF: {
        const auto dim = get<std::int32_t>(is);
        if (dim < 1) throw DecodeError("bad MF dimension");
        auto m = std::make_unique<MFModel>(n_users, n_items, dim);
        auto theta = get_vec<double>(is, kMaxArray);
        if (theta.size() != m->params().size()) throw DecodeError("MF parameter count mismatch");
        m->params() = std::move(theta);
        out = std::move(m);
        break;
    }
    case ModelKind::FM: {
        const auto dim = get<std::int32_t>(is);
        const auto n_domains = get<std::uint64_t>(is);
        auto dom = get_vec<std::uint32_t>(is, kMaxArray);
        if (dim < 1 || dom.size() != n_items || n_domains > kMaxArray) throw DecodeError("bad FM header");
        auto m = std::make_unique<FMModel>(n_users, n_items, std::move(dom), n_domains, dim);
        auto theta = get_vec<double>(is, kMaxArray);
        if (theta.size() != m->params().size()) throw DecodeError("FM parameter count mismatch");
        m->params() = std::move(theta);
        out = std::move(m);
        break;
    }
    case ModelKind::ItemKNN: {
        const auto k = get<std::int32_t>(is);
        if (k < 1) throw DecodeError("bad KNN neighborhood size");
        auto m = std::make_unique<KNNModel>(n_users, n_items, k);
        for (std::uint32_t u = 0; u < n_users; ++u) {
            m->user_likes_[u] = get_vec<std::uint32_t>(is, n_items);
            for (auto i : m->user_likes_[u]) {
                if (i >= n_items) throw DecodeError("KNN item index out of range");
                m->item_users_[i].push_back(u);
            }
        }
        for (std::uint32_t i = 0; i < n_items; ++i) {
            const auto n = get<std::uint64_t>(is);
            if (n > n_items) throw DecodeError("KNN neighbor list too long");
            for (std::uint64_t r = 0; r < n; ++r) {
                const auto j = get<std::uint32_t>(is);
                const auto s = get<double>(is);
                if (j >= n_items) throw DecodeError("KNN neighbor index out of range");
                m->neighbors_[i].emplace_back(j, s);
            }
        }
        out = std::move(m);
        break;
    }
    case ModelKind::Popularity: {
        auto m = std::make_unique<PopularityModel>(n_users, n_items);
        auto counts = get_vec<double>(is, kMaxArray);
        if (counts.size() != n_items) throw DecodeError("popularity count mismatch");
        m->counts_ = std::move(counts);
        out = std::move(m);
        break;
    }
    default:
        throw DecodeError("unknown model kind " + std::to_string(kind));
    }
    out->loss_history_ = std::move(history);
    return out;
}

std::unique_ptr<Recommender> load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LookupError("cannot open model file " + path.string());
    return read_model(is);
}

} // namespace rah
