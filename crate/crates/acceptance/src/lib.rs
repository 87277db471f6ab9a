//! Holds the `acceptance` test target, which runs every acceptance
//! criterion and prints one pass/fail line per criterion.
