#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdgap/error.hpp"

namespace sdgap {

// ---------------------------------------------------------------------------
// Dates and time slices
// ---------------------------------------------------------------------------

struct Date {
    int year = 0;
    int month = 0; // 1..12
    int day = 0;   // 1..31

    bool operator==(const Date&) const = default;
};

struct DateTime {
    Date date;
    int hour = 0;
    int minute = 0;
    int second = 0;

    bool operator==(const DateTime&) const = default;
};

/// Days since 1970-01-01 for a civil date (proleptic Gregorian).
std::int64_t days_from_civil(const Date& d);

/// Day of week, 0 = Monday .. 6 = Sunday.
int weekday(const Date& d);

/// Date `n` days after `d`.
Date add_days(const Date& d, std::int64_t n);

/// Strict "YYYY-MM-DD" parse; rejects impossible dates.
Date parse_date(const std::string& s);

/// Strict "YYYY-MM-DD HH:MM:SS" parse.
DateTime parse_datetime(const std::string& s);

std::string format_date(const Date& d);
std::string format_datetime(const DateTime& t);

/// A 10-minute bucket: day ordinal from the dataset start plus slot in [0,144).
struct TimeSlice {
    int day = 0;
    int slot = 0;

    bool operator==(const TimeSlice&) const = default;
    auto operator<=>(const TimeSlice&) const = default;
};

inline constexpr int kSlotsPerDay = 144;

/// Bucket a timestamp: day = whole days since dataset_start, slot = floor of
/// minute-of-day / 10. Timestamps before dataset_start are a DataError.
TimeSlice slice_of(const DateTime& ts, const Date& dataset_start);

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

/// Bijection between opaque block hashes and dense 0-based indices.
class BlockMap {
public:
    /// Parse "hash<TAB>1-based-index" lines. Indices must cover 1..B exactly.
    static BlockMap parse(std::istream& in);

    /// Build directly from a hash list (hash i -> index i).
    static BlockMap from_hashes(std::vector<std::string> hashes);

    std::size_t size() const { return hashes_.size(); }
    const std::string& hash_of(int index) const { return hashes_.at(index); }

    /// Index for a hash, or -1 when unregistered.
    int find(const std::string& hash) const;

    /// Index for a hash; unregistered hash is a DataError naming it.
    int require(const std::string& hash) const;

    /// Emit in the blocks.tsv format.
    std::string format() const;

private:
    std::vector<std::string> hashes_;
    std::unordered_map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// Orders
// ---------------------------------------------------------------------------

/// One ride order. An absent driver_id means the order went unanswered; those
/// are the orders the gap tensor counts.
struct OrderRecord {
    std::string order_id;
    std::optional<std::string> driver_id;
    std::string passenger_id;
    int start_block = -1;
    std::optional<int> dest_block;
    double price = 0.0;
    DateTime timestamp;
};

enum class ParseMode {
    Strict,  // first malformed line aborts with a DataError
    Lenient, // malformed lines are skipped and counted
};

struct OrdersResult {
    std::vector<OrderRecord> records;
    std::size_t lines = 0;
    std::size_t skipped = 0;
};

/// Parse orders.tsv: TAB-separated
///   order_id driver_id passenger_id start_hash dest_hash price timestamp
/// The literal `NULL` (case-sensitive) in driver_id or dest_hash means absent.
OrdersResult parse_orders(std::istream& in, const BlockMap& blocks,
                          ParseMode mode = ParseMode::Strict);

std::string format_order(const OrderRecord& r, const BlockMap& blocks);

// ---------------------------------------------------------------------------
// Calendar
// ---------------------------------------------------------------------------

enum class DayType { Workday, Holiday };

/// Day-type map covering every day of the dataset range.
class Calendar {
public:
    Calendar() = default;
    Calendar(Date start, std::vector<DayType> types);

    const Date& start() const { return start_; }
    int days() const { return static_cast<int>(types_.size()); }

    DayType type_of(int day) const;
    bool is_holiday(int day) const { return type_of(day) == DayType::Holiday; }

    /// 0 = Monday .. 6 = Sunday.
    int weekday_of(int day) const;

    int count(DayType t) const;

private:
    Date start_{};
    int start_weekday_ = 0;
    std::vector<DayType> types_;
};

/// Parse calendar.tsv ("YYYY-MM-DD<TAB>W|H") over [start, start+days).
/// Days absent from the file default to W on Mon-Fri and H on Sat-Sun; lines
/// for dates outside the range are ignored.
Calendar parse_calendar(std::istream& in, const Date& start, int days);

std::string format_calendar(const Calendar& cal);

// ---------------------------------------------------------------------------
// POI table
// ---------------------------------------------------------------------------

/// Per-block counts over the POI category universe. Categories are opaque
/// labels (e.g. "1#2"), ordered lexicographically; rows follow block indices.
struct PoiTable {
    std::vector<std::string> categories;
    std::size_t blocks = 0;
    std::vector<std::int64_t> counts; // blocks x categories, row-major

    std::size_t P() const { return categories.size(); }
    std::int64_t at(std::size_t block, std::size_t cat) const {
        return counts[block * categories.size() + cat];
    }
    std::int64_t& at(std::size_t block, std::size_t cat) {
        return counts[block * categories.size() + cat];
    }

    /// Per-category totals over all blocks.
    std::vector<double> column_totals() const;

    bool operator==(const PoiTable&) const = default;
};

/// Parse poi.txt: each line is `block_hash( label:count)*`. Every registered
/// block gets a row; blocks missing from the file get all-zero rows.
PoiTable parse_poi_table(std::istream& in, const BlockMap& blocks);

/// Inverse of parse_poi_table; parsing the output reproduces the table.
std::string format_poi_table(const PoiTable& poi, const BlockMap& blocks);

} // namespace sdgap
