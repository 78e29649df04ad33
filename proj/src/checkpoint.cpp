#include "vtmorph/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vtmorph {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return &t;
    }
    return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
        out << kCheckpointMagic << '\n';
        out << "config " << ckpt.config.size() << '\n';
        for (const auto& [k, v] : ckpt.config) {
            if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
                throw CheckpointError("config entry not serializable: " + k);
            }
            out << k << '=' << v << '\n';
        }
        out << "step " << ckpt.step << '\n';
        out << "tensors " << ckpt.tensors.size() << '\n';
        for (const auto& [name, t] : ckpt.tensors) {
            if (name.empty() || name.find_first_of(" \n") != std::string::npos) {
                throw CheckpointError("tensor name not serializable: '" + name + "'");
            }
            out << name << ' ' << t.shape().size();
            for (auto d : t.shape()) out << ' ' << d;
            out << '\n';
            const auto data = t.data();
            out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
        }
        if (!out) throw CheckpointError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace {

std::string read_line(std::istream& in, const std::filesystem::path& path) {
    std::string line;
    if (!std::getline(in, line)) throw CheckpointError(path.string() + ": truncated checkpoint");
    return line;
}

int64_t parse_count(const std::string& line, const std::string& key, const std::filesystem::path& path) {
    std::istringstream is(line);
    std::string k;
    int64_t n = -1;
    if (!(is >> k >> n) || k != key || n < 0) {
        throw CheckpointError(path.string() + ": expected '" + key + " <n>', got '" + line + "'");
    }
    return n;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    if (read_line(in, path) != kCheckpointMagic) {
        throw CheckpointError(path.string() + ": not a checkpoint (missing " + std::string(kCheckpointMagic) + ")");
    }
    Checkpoint ckpt;
    const auto n_config = parse_count(read_line(in, path), "config", path);
    for (int64_t i = 0; i < n_config; ++i) {
        const auto line = read_line(in, path);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw CheckpointError(path.string() + ": bad config line '" + line + "'");
        ckpt.config[line.substr(0, eq)] = line.substr(eq + 1);
    }
    ckpt.step = parse_count(read_line(in, path), "step", path);
    const auto n_tensors = parse_count(read_line(in, path), "tensors", path);
    for (int64_t i = 0; i < n_tensors; ++i) {
        std::istringstream header(read_line(in, path));
        std::string name;
        size_t rank = 0;
        if (!(header >> name >> rank) || rank == 0 || rank > 8) {
            throw CheckpointError(path.string() + ": bad tensor header");
        }
        Shape shape(rank);
        for (auto& d : shape) {
            if (!(header >> d) || d <= 0) throw CheckpointError(path.string() + ": bad extent for " + name);
        }
        std::vector<float> values(static_cast<size_t>(shape_numel(shape)));
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
        if (!in) throw CheckpointError(path.string() + ": truncated data for " + name);
        ckpt.tensors.emplace_back(name, Tensor::from_vector(std::move(shape), std::move(values)));
    }
    return ckpt;
}

}  // namespace vtmorph
