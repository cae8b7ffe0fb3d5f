#include "sdgap/core_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>
#include <string_view>

namespace sdgap {

namespace {

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isdigit(c) != 0;
    });
}

int to_int(std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw DataError("not an integer: '" + std::string(s) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    out.push_back(s.substr(start));
    return out;
}

int days_in_month(int y, int m) {
    static const int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2) {
        const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        return leap ? 29 : 28;
    }
    return lengths[m - 1];
}

} // namespace

std::int64_t days_from_civil(const Date& d) {
    // Howard Hinnant's algorithm, epoch 1970-01-01.
    std::int64_t y = d.year;
    const int m = d.month;
    const int day = d.day;
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

int weekday(const Date& d) {
    // 1970-01-01 was a Thursday (weekday 3 with 0 = Monday).
    const std::int64_t z = days_from_civil(d) + 3;
    return static_cast<int>(((z % 7) + 7) % 7);
}

Date add_days(const Date& d, std::int64_t n) {
    // civil_from_days (Hinnant), applied to days_from_civil(d) + n
    std::int64_t z = days_from_civil(d) + n + 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned day = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m),
                static_cast<int>(day)};
}

Date parse_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        throw DataError("bad date '" + s + "' (want YYYY-MM-DD)");
    std::string_view sv(s);
    if (!all_digits(sv.substr(0, 4)) || !all_digits(sv.substr(5, 2)) ||
        !all_digits(sv.substr(8, 2)))
        throw DataError("bad date '" + s + "' (want YYYY-MM-DD)");
    Date d{to_int(sv.substr(0, 4)), to_int(sv.substr(5, 2)), to_int(sv.substr(8, 2))};
    if (d.month < 1 || d.month > 12 || d.day < 1 ||
        d.day > days_in_month(d.year, d.month))
        throw DataError("impossible date '" + s + "'");
    return d;
}

DateTime parse_datetime(const std::string& s) {
    if (s.size() != 19 || s[10] != ' ' || s[13] != ':' || s[16] != ':')
        throw DataError("bad timestamp '" + s + "' (want YYYY-MM-DD HH:MM:SS)");
    std::string_view sv(s);
    if (!all_digits(sv.substr(11, 2)) || !all_digits(sv.substr(14, 2)) ||
        !all_digits(sv.substr(17, 2)))
        throw DataError("bad timestamp '" + s + "'");
    DateTime t;
    t.date = parse_date(s.substr(0, 10));
    t.hour = to_int(sv.substr(11, 2));
    t.minute = to_int(sv.substr(14, 2));
    t.second = to_int(sv.substr(17, 2));
    if (t.hour > 23 || t.minute > 59 || t.second > 59)
        throw DataError("impossible time in '" + s + "'");
    return t;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

std::string format_datetime(const DateTime& t) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:%02d", t.date.year,
                  t.date.month, t.date.day, t.hour, t.minute, t.second);
    return buf;
}

TimeSlice slice_of(const DateTime& ts, const Date& dataset_start) {
    const std::int64_t day = days_from_civil(ts.date) - days_from_civil(dataset_start);
    if (day < 0)
        throw DataError("timestamp " + format_datetime(ts) +
                        " precedes dataset start " + format_date(dataset_start));
    const int minute_of_day = ts.hour * 60 + ts.minute;
    return TimeSlice{static_cast<int>(day), minute_of_day / 10};
}

// ---------------------------------------------------------------------------
// BlockMap
// ---------------------------------------------------------------------------

BlockMap BlockMap::parse(std::istream& in) {
    std::map<int, std::string> by_index;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 2)
            throw DataError("blocks.tsv line " + std::to_string(lineno) +
                            ": want hash<TAB>index");
        if (!all_digits(fields[1]))
            throw DataError("blocks.tsv line " + std::to_string(lineno) +
                            ": bad index '" + std::string(fields[1]) + "'");
        const int idx = to_int(fields[1]);
        if (idx < 1)
            throw DataError("blocks.tsv line " + std::to_string(lineno) +
                            ": index must be >= 1");
        if (!by_index.emplace(idx, std::string(fields[0])).second)
            throw DataError("blocks.tsv line " + std::to_string(lineno) +
                            ": duplicate index " + std::to_string(idx));
    }
    if (by_index.empty()) throw DataError("blocks.tsv: no blocks");
    std::vector<std::string> hashes;
    hashes.reserve(by_index.size());
    int expect = 1;
    for (const auto& [idx, hash] : by_index) {
        if (idx != expect)
            throw DataError("blocks.tsv: indices must cover 1.." +
                            std::to_string(by_index.size()) + " (missing " +
                            std::to_string(expect) + ")");
        hashes.push_back(hash);
        ++expect;
    }
    return from_hashes(std::move(hashes));
}

BlockMap BlockMap::from_hashes(std::vector<std::string> hashes) {
    BlockMap bm;
    bm.hashes_ = std::move(hashes);
    for (std::size_t i = 0; i < bm.hashes_.size(); ++i) {
        if (!bm.index_.emplace(bm.hashes_[i], static_cast<int>(i)).second)
            throw DataError("duplicate block hash '" + bm.hashes_[i] + "'");
    }
    return bm;
}

int BlockMap::find(const std::string& hash) const {
    auto it = index_.find(hash);
    return it == index_.end() ? -1 : it->second;
}

int BlockMap::require(const std::string& hash) const {
    const int idx = find(hash);
    if (idx < 0) throw DataError("unknown block hash '" + hash + "'");
    return idx;
}

std::string BlockMap::format() const {
    std::string out;
    for (std::size_t i = 0; i < hashes_.size(); ++i)
        out += hashes_[i] + "\t" + std::to_string(i + 1) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Orders
// ---------------------------------------------------------------------------

namespace {

double parse_price(std::string_view s) {
    if (s.empty()) throw DataError("empty price");
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw DataError("bad price '" + std::string(s) + "'");
    if (v < 0.0) throw DataError("negative price " + std::string(s));
    return v;
}

OrderRecord parse_order_line(std::string_view line, const BlockMap& blocks) {
    auto f = split(line, '\t');
    if (f.size() != 7)
        throw DataError("want 7 TAB-separated fields, got " +
                        std::to_string(f.size()));
    OrderRecord r;
    r.order_id = std::string(f[0]);
    if (f[1] != "NULL") r.driver_id = std::string(f[1]);
    r.passenger_id = std::string(f[2]);
    r.start_block = blocks.require(std::string(f[3]));
    if (f[4] != "NULL") r.dest_block = blocks.require(std::string(f[4]));
    r.price = parse_price(f[5]);
    r.timestamp = parse_datetime(std::string(f[6]));
    return r;
}

} // namespace

OrdersResult parse_orders(std::istream& in, const BlockMap& blocks, ParseMode mode) {
    OrdersResult res;
    std::string line;
    while (std::getline(in, line)) {
        ++res.lines;
        try {
            res.records.push_back(parse_order_line(line, blocks));
        } catch (const DataError& e) {
            if (mode == ParseMode::Strict)
                throw DataError("orders line " + std::to_string(res.lines) + ": " +
                                e.what());
            ++res.skipped;
        }
    }
    return res;
}

std::string format_order(const OrderRecord& r, const BlockMap& blocks) {
    char price[32];
    std::snprintf(price, sizeof price, "%.2f", r.price);
    std::string out = r.order_id;
    out += '\t';
    out += r.driver_id ? *r.driver_id : "NULL";
    out += '\t';
    out += r.passenger_id;
    out += '\t';
    out += blocks.hash_of(r.start_block);
    out += '\t';
    out += r.dest_block ? blocks.hash_of(*r.dest_block) : "NULL";
    out += '\t';
    out += price;
    out += '\t';
    out += format_datetime(r.timestamp);
    return out;
}

// ---------------------------------------------------------------------------
// Calendar
// ---------------------------------------------------------------------------

Calendar::Calendar(Date start, std::vector<DayType> types)
    : start_(start), start_weekday_(weekday(start)), types_(std::move(types)) {}

DayType Calendar::type_of(int day) const {
    if (day < 0 || day >= days())
        throw DataError("day " + std::to_string(day) + " outside calendar range");
    return types_[day];
}

int Calendar::weekday_of(int day) const { return (start_weekday_ + day) % 7; }

int Calendar::count(DayType t) const {
    return static_cast<int>(std::count(types_.begin(), types_.end(), t));
}

Calendar parse_calendar(std::istream& in, const Date& start, int days) {
    if (days <= 0) throw ConfigError("calendar needs a positive day count");
    std::vector<DayType> types(days);
    const int start_wd = weekday(start);
    for (int d = 0; d < days; ++d)
        types[d] = ((start_wd + d) % 7 >= 5) ? DayType::Holiday : DayType::Workday;

    const std::int64_t start_ord = days_from_civil(start);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split(line, '\t');
        if (f.size() != 2)
            throw DataError("calendar line " + std::to_string(lineno) +
                            ": want date<TAB>W|H");
        Date date;
        try {
            date = parse_date(std::string(f[0]));
        } catch (const DataError& e) {
            throw DataError("calendar line " + std::to_string(lineno) + ": " +
                            e.what());
        }
        DayType t;
        if (f[1] == "W")
            t = DayType::Workday;
        else if (f[1] == "H")
            t = DayType::Holiday;
        else
            throw DataError("calendar line " + std::to_string(lineno) +
                            ": bad flag '" + std::string(f[1]) + "'");
        const std::int64_t off = days_from_civil(date) - start_ord;
        if (off >= 0 && off < days) types[off] = t;
    }
    return Calendar(start, std::move(types));
}

std::string format_calendar(const Calendar& cal) {
    std::string out;
    for (int d = 0; d < cal.days(); ++d) {
        out += format_date(add_days(cal.start(), d));
        out += '\t';
        out += cal.type_of(d) == DayType::Holiday ? 'H' : 'W';
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// PoiTable
// ---------------------------------------------------------------------------

std::vector<double> PoiTable::column_totals() const {
    std::vector<double> totals(P(), 0.0);
    for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t p = 0; p < P(); ++p) totals[p] += static_cast<double>(at(b, p));
    return totals;
}

PoiTable parse_poi_table(std::istream& in, const BlockMap& blocks) {
    struct RawRow {
        std::vector<std::pair<std::string, std::int64_t>> entries;
    };
    std::vector<RawRow> rows(blocks.size());
    std::vector<bool> seen(blocks.size(), false);
    std::vector<std::string> labels;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tokens = split(line, ' ');
        const std::string hash(tokens[0]);
        int b;
        try {
            b = blocks.require(hash);
        } catch (const DataError& e) {
            throw DataError("poi line " + std::to_string(lineno) + ": " + e.what());
        }
        if (seen[b])
            throw DataError("poi line " + std::to_string(lineno) +
                            ": duplicate block '" + hash + "'");
        seen[b] = true;
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            const std::string_view tok = tokens[i];
            if (tok.empty()) continue;
            const auto colon = tok.rfind(':');
            if (colon == std::string_view::npos)
                throw DataError("poi line " + std::to_string(lineno) +
                                ": token '" + std::string(tok) +
                                "' is not label:count");
            const std::string_view label = tok.substr(0, colon);
            const std::string_view count_s = tok.substr(colon + 1);
            if (label.empty() || !all_digits(count_s))
                throw DataError("poi line " + std::to_string(lineno) +
                                ": bad count in '" + std::string(tok) + "'");
            rows[b].entries.emplace_back(std::string(label), to_int(count_s));
            labels.emplace_back(label);
        }
    }

    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());

    PoiTable poi;
    poi.categories = std::move(labels);
    poi.blocks = blocks.size();
    poi.counts.assign(poi.blocks * poi.P(), 0);
    for (std::size_t b = 0; b < poi.blocks; ++b) {
        for (const auto& [label, count] : rows[b].entries) {
            const auto it = std::lower_bound(poi.categories.begin(),
                                             poi.categories.end(), label);
            poi.at(b, static_cast<std::size_t>(it - poi.categories.begin())) = count;
        }
    }
    return poi;
}

std::string format_poi_table(const PoiTable& poi, const BlockMap& blocks) {
    // Zero counts are omitted except when a category would otherwise vanish
    // from the file entirely; then block 0 carries an explicit label:0.
    std::vector<bool> appears(poi.P(), false);
    for (std::size_t p = 0; p < poi.P(); ++p)
        for (std::size_t b = 0; b < poi.blocks && !appears[p]; ++b)
            if (poi.at(b, p) != 0) appears[p] = true;

    std::string out;
    for (std::size_t b = 0; b < poi.blocks; ++b) {
        out += blocks.hash_of(static_cast<int>(b));
        for (std::size_t p = 0; p < poi.P(); ++p) {
            const std::int64_t c = poi.at(b, p);
            if (c != 0 || (b == 0 && !appears[p])) {
                out += ' ';
                out += poi.categories[p];
                out += ':';
                out += std::to_string(c);
            }
        }
        out += '\n';
    }
    return out;
}

} // namespace sdgap
