#include "trajkit/types.hpp"

#include <cmath>
#include <string>

#include "trajkit/error.hpp"

namespace trajkit {

namespace {

bool all_finite(const std::vector<float>& v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

bool BBox::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 &&
         h > 0.0;
}

const char* to_string(Split split) { return split == Split::base ? "base" : "novel"; }

std::optional<Split> parse_split(const std::string& text) {
  if (text == "base") return Split::base;
  if (text == "novel") return Split::novel;
  return std::nullopt;
}

const char* to_string(LabelSource source) {
  switch (source) {
    case LabelSource::cate: return "cate";
    case LabelSource::attr: return "attr";
    case LabelSource::det: return "det";
  }
  return "det";
}

std::optional<LabelSource> parse_label_source(const std::string& text) {
  if (text == "cate") return LabelSource::cate;
  if (text == "attr") return LabelSource::attr;
  if (text == "det") return LabelSource::det;
  return std::nullopt;
}

Vocabulary Vocabulary::from_entries(std::vector<VocabularyEntry> entries, std::size_t dim_text) {
  Vocabulary vocab;
  vocab.dim_text_ = dim_text;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!vocab.index_.emplace(e.category_id, i).second) {
      throw Error(ErrorCode::DuplicateCategory, "DuplicateCategory(" + std::to_string(e.category_id) + ")");
    }
    if (e.cate_embedding.empty() || e.attr_embedding.empty()) {
      throw Error(ErrorCode::MissingEmbedding, "category " + std::to_string(e.category_id));
    }
    if (e.cate_embedding.size() != dim_text || e.attr_embedding.size() != dim_text) {
      throw Error(ErrorCode::DimMismatch, "category " + std::to_string(e.category_id) +
                                              ": embedding width differs from dim_text=" +
                                              std::to_string(dim_text));
    }
    if (!all_finite(e.cate_embedding) || !all_finite(e.attr_embedding)) {
      throw Error(ErrorCode::NonFinite, "category " + std::to_string(e.category_id));
    }
  }
  vocab.entries_ = std::move(entries);
  return vocab;
}

const VocabularyEntry* Vocabulary::find(CategoryId id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

std::map<CategoryId, Split> Vocabulary::splits() const {
  std::map<CategoryId, Split> out;
  for (const auto& e : entries_) out.emplace(e.category_id, e.split);
  return out;
}

}  // namespace trajkit
