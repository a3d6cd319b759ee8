#include "dagfit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace dagfit {

bool Dataset::has_column(const std::string& name) const {
    for (const auto& c : columns_) {
        if (c.name == name) return true;
    }
    return false;
}

const Column& Dataset::column(const std::string& name) const {
    for (const auto& c : columns_) {
        if (c.name == name) return c;
    }
    throw DataError("missing column: " + name);
}

void Dataset::check_rows(const std::string& name, std::size_t n) {
    if (has_column(name)) throw DataError("duplicate column: " + name);
    if (!columns_.empty() && n != rows_) {
        throw DataError("column " + name + " has " + std::to_string(n) + " rows, expected " +
                        std::to_string(rows_));
    }
    rows_ = n;
}

void Dataset::add_factor(const std::string& name, const std::vector<std::string>& raw_values) {
    check_rows(name, raw_values.size());
    Column col;
    col.name = name;
    col.cls = ColumnClass::Factor;
    std::map<std::string, int> index;
    std::vector<std::string> levels(raw_values);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    for (int i = 0; i < static_cast<int>(levels.size()); ++i) index[levels[i]] = i;
    col.levels = std::move(levels);
    col.codes.reserve(raw_values.size());
    for (const auto& v : raw_values) col.codes.push_back(index[v]);
    columns_.push_back(std::move(col));
}

void Dataset::add_factor_coded(const std::string& name, std::vector<int> codes,
                               std::vector<std::string> levels) {
    check_rows(name, codes.size());
    if (!std::is_sorted(levels.begin(), levels.end())) {
        throw DataError("factor levels must be sorted: " + name);
    }
    for (int c : codes) {
        if (c < 0 || c >= static_cast<int>(levels.size())) {
            throw DataError("factor code out of range in column " + name);
        }
    }
    Column col;
    col.name = name;
    col.cls = ColumnClass::Factor;
    col.codes = std::move(codes);
    col.levels = std::move(levels);
    columns_.push_back(std::move(col));
}

void Dataset::add_count(const std::string& name, std::vector<std::int64_t> counts) {
    check_rows(name, counts.size());
    for (auto v : counts) {
        if (v < 0) throw DataError("negative value in count column " + name);
    }
    Column col;
    col.name = name;
    col.cls = ColumnClass::Count;
    col.counts = std::move(counts);
    columns_.push_back(std::move(col));
}

void Dataset::add_continuous(const std::string& name, std::vector<double> values) {
    check_rows(name, values.size());
    for (double v : values) {
        if (!std::isfinite(v)) throw DataError("non-finite value in column " + name);
    }
    Column col;
    col.name = name;
    col.cls = ColumnClass::Continuous;
    col.values = std::move(values);
    columns_.push_back(std::move(col));
}

Dataset Dataset::filtered(const std::vector<bool>& keep) const {
    if (keep.size() != rows_) throw DataError("filter mask size mismatch");
    Dataset out;
    for (const auto& c : columns_) {
        switch (c.cls) {
            case ColumnClass::Factor: {
                std::vector<std::string> vals;
                for (std::size_t i = 0; i < rows_; ++i) {
                    if (keep[i]) vals.push_back(c.level_of(i));
                }
                out.add_factor(c.name, vals);
                break;
            }
            case ColumnClass::Count: {
                std::vector<std::int64_t> vals;
                for (std::size_t i = 0; i < rows_; ++i) {
                    if (keep[i]) vals.push_back(c.counts[i]);
                }
                out.add_count(c.name, std::move(vals));
                break;
            }
            case ColumnClass::Continuous: {
                std::vector<double> vals;
                for (std::size_t i = 0; i < rows_; ++i) {
                    if (keep[i]) vals.push_back(c.values[i]);
                }
                out.add_continuous(c.name, std::move(vals));
                break;
            }
        }
    }
    return out;
}

}  // namespace dagfit
