#include "negascope/csv.hpp"
#include "negascope/errors.hpp"
#include "negascope/hash.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace negascope;

TEST(Csv, ParsesQuotedFields) {
    const auto rows = parse_csv("a,b,c\n\"x, y\",\"say \"\"hi\"\"\",\"two\nlines\"\nlast,,\n");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1].fields, (std::vector<std::string>{"x, y", "say \"hi\"", "two\nlines"}));
    EXPECT_EQ(rows[1].line, 2u);
    EXPECT_EQ(rows[2].line, 4u);
    EXPECT_EQ(rows[2].fields, (std::vector<std::string>{"last", "", ""}));
}

TEST(Csv, HandlesCrlfBomAndMissingFinalNewline) {
    const auto rows = parse_csv("\xEF\xBB\xBFh1,h2\r\n1,2");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].fields[0], "h1");
    EXPECT_EQ(rows[1].fields, (std::vector<std::string>{"1", "2"}));
}

TEST(Csv, SkipsBlankLines) {
    EXPECT_EQ(parse_csv("a\n\nb\n").size(), 2u);
}

TEST(Csv, UnterminatedQuoteNamesTheLine) {
    try {
        parse_csv("a,b\nc,\"open\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_csv("ab\"c\n"), ParseError);
}

TEST(Csv, FieldQuotingRoundTrips) {
    const std::vector<std::string> fields{"plain", " leading", "a,b", "q\"q", "multi\nline", ""};
    std::ostringstream out;
    write_csv_row(out, fields);
    EXPECT_EQ(out.str(), "plain,\" leading\",\"a,b\",\"q\"\"q\",\"multi\nline\",\n");
    const auto rows = parse_csv(out.str());
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].fields, fields);
}

TEST(Csv, NumberFormatting) {
    EXPECT_EQ(format_number(0.0), "0");
    EXPECT_EQ(format_number(-0.0), "0");
    EXPECT_EQ(format_number(1.5), "1.5");
    EXPECT_EQ(format_number(2.0 / 3.0), "0.666667");
    EXPECT_EQ(format_number(-1234567.0), "-1.23457e+06");
    EXPECT_EQ(format_number(1e-7), "1e-07");
}

TEST(Csv, MissingFileIsAnIoError) {
    EXPECT_THROW(read_csv("/nonexistent/file.csv"), IoError);
}

TEST(Hash, KnownDigests) {
    EXPECT_EQ(sha256_bytes(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_bytes("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_THROW(sha256_file("/nonexistent/file"), IoError);
}
