#include "gam/corpus.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "gam/pe.hpp"
#include "gam/rng.hpp"

namespace gam {

namespace {

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), data.size());
  if (!out) throw CorpusError("cannot write " + path.string());
}

}  // namespace

std::vector<std::uint64_t> PayloadCorpus::sizes() const {
  std::vector<std::uint64_t> c;
  c.reserve(sections.size());
  for (const auto& s : sections) c.push_back(s.content.size());
  return c;
}

std::uint64_t PayloadCorpus::total_bytes() const {
  std::uint64_t sum = 0;
  for (const auto& s : sections) sum += s.content.size();
  return sum;
}

PayloadCorpus harvest(const std::filesystem::path& benign_dir, const HarvestOptions& options) {
  if (!std::filesystem::is_directory(benign_dir))
    throw CorpusError("benign directory does not exist: " + benign_dir.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(benign_dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  if (files.empty()) throw CorpusError("empty directory: " + benign_dir.string());
  std::sort(files.begin(), files.end());  // stable candidate order before the shuffle

  std::vector<PayloadSection> pool;
  for (const auto& path : files) {
    pe::PeFile file;
    try {
      file = pe::parse(read_file(path));
    } catch (const pe::ParseError&) {
      continue;  // non-PE files in the directory are ignored
    }
    for (std::size_t i = 0; i < file.section_headers.size(); ++i) {
      const auto& h = file.section_headers[i];
      if (h.name() != options.name_filter || file.section_data[i].empty()) continue;
      pool.push_back({h.name(), file.section_data[i]});
    }
  }
  if (pool.empty())
    throw CorpusError("no sections named '" + options.name_filter + "' found under " +
                      benign_dir.string());

  // Seeded Fisher-Yates, then take the prefix subject to both caps.
  Rng rng(options.seed);
  for (std::size_t i = pool.size(); i > 1; --i)
    std::swap(pool[i - 1], pool[rng.below(i)]);

  PayloadCorpus corpus;
  std::uint64_t total = 0;
  for (auto& section : pool) {
    if (corpus.sections.size() >= options.max_sections) break;
    if (total + section.content.size() > options.max_total_bytes) break;
    total += section.content.size();
    corpus.sections.push_back(std::move(section));
  }
  if (corpus.sections.empty())
    throw CorpusError("no matching section fits within the byte cap");
  return corpus;
}

void save(const PayloadCorpus& corpus, const std::filesystem::path& dir) {
  if (corpus.sections.empty()) throw CorpusError("refusing to save an empty corpus");
  std::filesystem::create_directories(dir);
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < corpus.sections.size(); ++i) {
    char blob[32];
    std::snprintf(blob, sizeof(blob), "%03zu.bin", i);
    write_file(dir / blob, corpus.sections[i].content);
    entries.push_back({{"source_name", corpus.sections[i].source_name},
                       {"blob_file", blob},
                       {"size", corpus.sections[i].content.size()}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << nlohmann::json{{"entries", entries}}.dump(2) << '\n';
  if (!out) throw CorpusError("cannot write manifest under " + dir.string());
}

PayloadCorpus load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw CorpusError("missing manifest: " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw CorpusError(std::string("corrupt manifest: ") + e.what());
  }
  if (!manifest.contains("entries") || !manifest["entries"].is_array() ||
      manifest["entries"].empty())
    throw CorpusError("corrupt manifest: no entries");

  PayloadCorpus corpus;
  for (const auto& entry : manifest["entries"]) {
    if (!entry.contains("source_name") || !entry.contains("blob_file") || !entry.contains("size"))
      throw CorpusError("corrupt manifest: incomplete entry");
    const auto blob_path = dir / entry["blob_file"].get<std::string>();
    if (!std::filesystem::is_regular_file(blob_path))
      throw CorpusError("missing blob: " + blob_path.string());
    Bytes content = read_file(blob_path);
    if (content.size() != entry["size"].get<std::uint64_t>())
      throw CorpusError("size mismatch for " + blob_path.string() + ": manifest says " +
                        std::to_string(entry["size"].get<std::uint64_t>()) + ", blob has " +
                        std::to_string(content.size()));
    corpus.sections.push_back({entry["source_name"].get<std::string>(), std::move(content)});
  }
  return corpus;
}

}  // namespace gam
