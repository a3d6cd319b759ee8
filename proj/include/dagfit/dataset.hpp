#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dagfit {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ColumnClass { Factor, Count, Continuous };

/// One typed column. Factors store integer codes into a sorted level list;
/// counts are nonnegative integers; continuous values are doubles.
struct Column {
    std::string name;
    ColumnClass cls = ColumnClass::Continuous;
    std::vector<int> codes;               // Factor
    std::vector<std::string> levels;      // Factor (sorted, unique)
    std::vector<std::int64_t> counts;     // Count
    std::vector<double> values;           // Continuous

    std::size_t size() const {
        switch (cls) {
            case ColumnClass::Factor: return codes.size();
            case ColumnClass::Count: return counts.size();
            case ColumnClass::Continuous: return values.size();
        }
        return 0;
    }

    const std::string& level_of(std::size_t row) const { return levels.at(codes.at(row)); }

    /// Row value as a double regardless of class (factor rows yield codes).
    double as_double(std::size_t row) const {
        switch (cls) {
            case ColumnClass::Factor: return static_cast<double>(codes.at(row));
            case ColumnClass::Count: return static_cast<double>(counts.at(row));
            case ColumnClass::Continuous: return values.at(row);
        }
        return 0.0;
    }
};

/// Columnar table of typed observations.
class Dataset {
public:
    Dataset() = default;

    std::size_t row_count() const { return rows_; }
    std::size_t column_count() const { return columns_.size(); }
    const std::vector<Column>& columns() const { return columns_; }

    bool has_column(const std::string& name) const;
    const Column& column(const std::string& name) const;

    void add_factor(const std::string& name, const std::vector<std::string>& raw_values);
    void add_factor_coded(const std::string& name, std::vector<int> codes,
                          std::vector<std::string> levels);
    void add_count(const std::string& name, std::vector<std::int64_t> counts);
    void add_continuous(const std::string& name, std::vector<double> values);

    /// Rows selected by a keep-mask, preserving order and column types.
    /// Factor levels are re-derived from the surviving rows.
    Dataset filtered(const std::vector<bool>& keep) const;

private:
    void check_rows(const std::string& name, std::size_t n);

    std::vector<Column> columns_;
    std::size_t rows_ = 0;
};

}  // namespace dagfit
