from __future__ import annotations

import sqlite3

import pytest

from corpus import CORPUS_CATALOG, generate_corpus, join2_with_aliases
from nl2sql_eval.schema_extract import (
    Catalog,
    SchemaExtractionError,
    catalog_from_database,
    extract_schema,
    extract_schema_report,
)

CARDS_CATALOG = Catalog.build(
    {
        "cards": ["id", "name", "type", "toughness", "watermark", "uuid"],
        "foreign_data": ["id", "uuid", "language", "name"],
        "card_sets": ["id", "code", "name", "release_year", "total_cards"],
    }
)


class TestCatalog:
    def test_from_fixture_database(self, cards_db):
        catalog = catalog_from_database(cards_db)
        assert set(catalog.tables) == {"cards", "foreign_data", "card_sets"}
        assert catalog.columns_of("cards") == (
            "id", "name", "type", "toughness", "watermark", "uuid", "rarity", "mana_cost",
        )

    def test_empty_database(self, tmp_path):
        db = tmp_path / "empty.sqlite"
        sqlite3.connect(db).close()
        assert catalog_from_database(db).tables == {}

    def test_views_excluded(self, tmp_path):
        db = tmp_path / "with_view.sqlite"
        conn = sqlite3.connect(db)
        conn.execute("CREATE TABLE t (a INTEGER)")
        conn.execute("CREATE VIEW v AS SELECT a FROM t")
        conn.commit()
        conn.close()
        assert set(catalog_from_database(db).tables) == {"t"}

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            catalog_from_database(tmp_path / "nope.sqlite")

    def test_duplicate_table_rejected(self):
        with pytest.raises(ValueError, match="duplicate table"):
            Catalog.build({"T": ["a"], "t": ["b"]})


class TestExtractExamples:
    def test_count_with_where(self):
        schema = extract_schema("SELECT COUNT(id) FROM cards WHERE toughness = 99", CARDS_CATALOG)
        assert schema.to_json() == {"cards": ["id", "toughness"]}

    def test_aliased_join(self):
        sql = (
            "SELECT DISTINCT T1.name, T1.type FROM cards AS T1 "
            "INNER JOIN foreign_data AS T2 ON T2.uuid = T1.uuid "
            "WHERE T1.watermark = 'abzan'"
        )
        schema = extract_schema(sql, CARDS_CATALOG)
        assert schema.to_json() == {
            "cards": ["name", "type", "uuid", "watermark"],
            "foreign_data": ["uuid"],
        }

    def test_no_table_references(self):
        assert extract_schema("SELECT 1", CARDS_CATALOG).to_json() == {}

    def test_star_is_table_level(self):
        assert extract_schema("SELECT * FROM cards", CARDS_CATALOG).to_json() == {"cards": []}

    def test_star_expansion_flag(self):
        schema = extract_schema("SELECT * FROM foreign_data", CARDS_CATALOG, expand_star=True)
        assert schema.to_json() == {"foreign_data": ["id", "language", "name", "uuid"]}

    def test_count_star_adds_no_columns(self):
        schema = extract_schema(
            "SELECT COUNT(*) FROM card_sets WHERE release_year > 2019", CARDS_CATALOG
        )
        assert schema.to_json() == {"card_sets": ["release_year"]}

    def test_group_by_having_order_by(self):
        sql = (
            "SELECT watermark, COUNT(id) AS cnt FROM cards "
            "GROUP BY watermark HAVING COUNT(id) > 1 ORDER BY cnt DESC"
        )
        schema = extract_schema(sql, CARDS_CATALOG)
        assert schema.to_json() == {"cards": ["id", "watermark"]}

    def test_order_by_select_alias_not_a_column(self):
        sql = "SELECT toughness + 1 AS boosted FROM cards ORDER BY boosted"
        assert extract_schema(sql, CARDS_CATALOG).to_json() == {"cards": ["toughness"]}

    def test_cte_not_reported_as_table(self):
        sql = (
            "WITH tough AS (SELECT uuid, toughness FROM cards WHERE toughness > 5) "
            "SELECT f.name FROM tough JOIN foreign_data f ON tough.uuid = f.uuid"
        )
        schema = extract_schema(sql, CARDS_CATALOG)
        assert schema.to_json() == {
            "cards": ["toughness", "uuid"],
            "foreign_data": ["name", "uuid"],
        }

    def test_correlated_subquery(self):
        sql = (
            "SELECT name FROM cards c WHERE EXISTS "
            "(SELECT 1 FROM foreign_data f WHERE f.uuid = c.uuid)"
        )
        schema = extract_schema(sql, CARDS_CATALOG)
        assert schema.to_json() == {"cards": ["name", "uuid"], "foreign_data": ["uuid"]}

    def test_union_arms_both_counted(self):
        sql = "SELECT name FROM cards UNION SELECT name FROM foreign_data"
        schema = extract_schema(sql, CARDS_CATALOG)
        assert schema.to_json() == {"cards": ["name"], "foreign_data": ["name"]}

    def test_case_expression(self):
        sql = (
            "SELECT CASE WHEN toughness > 5 THEN 'big' ELSE type END AS size "
            "FROM cards ORDER BY size"
        )
        assert extract_schema(sql, CARDS_CATALOG).to_json() == {"cards": ["toughness", "type"]}

    def test_cast_type_not_a_column(self):
        sql = "SELECT CAST(toughness AS INTEGER) FROM cards"
        assert extract_schema(sql, CARDS_CATALOG).to_json() == {"cards": ["toughness"]}

    def test_schema_qualified_table(self):
        sql = "SELECT main.cards.id FROM main.cards"
        assert extract_schema(sql, CARDS_CATALOG).to_json() == {"cards": ["id"]}


class TestExtractErrors:
    def test_unparseable_sql(self):
        with pytest.raises(SchemaExtractionError):
            extract_schema("SELEC name FROM cards", CARDS_CATALOG)

    def test_unbalanced_parens(self):
        with pytest.raises(SchemaExtractionError):
            extract_schema("SELECT name FROM (SELECT * FROM cards", CARDS_CATALOG)

    def test_empty_statement(self):
        with pytest.raises(SchemaExtractionError):
            extract_schema("   ", CARDS_CATALOG)

    def test_non_select_rejected(self):
        with pytest.raises(SchemaExtractionError):
            extract_schema("DELETE FROM cards", CARDS_CATALOG)

    def test_unresolved_column_reported_not_raised(self):
        report = extract_schema_report("SELECT nmae FROM cards", CARDS_CATALOG)
        assert [issue.name for issue in report.unresolved] == ["nmae"]
        assert report.schema.to_json() == {"cards": []}

    def test_unknown_table_reported(self):
        report = extract_schema_report("SELECT x FROM not_a_table", CARDS_CATALOG)
        kinds = {issue.kind for issue in report.issues}
        assert "unknown_table" in kinds

    def test_ambiguous_column_flagged_first_table_wins(self):
        catalog = Catalog.build({"a": ["k", "v"], "b": ["k", "w"]})
        report = extract_schema_report("SELECT k FROM a JOIN b ON a.v = b.w", catalog)
        assert [issue.name for issue in report.ambiguous] == ["k"]
        assert ("a", "k") in report.schema.columns()
        assert ("b", "k") not in report.schema.columns()


class TestExtractProperties:
    def test_oracle_corpus_exact(self):
        corpus = generate_corpus(200, seed=7)
        for sql, truth in corpus:
            schema = extract_schema(sql, CORPUS_CATALOG)
            got = {table: set(cols) for table, cols in schema.entries.items()}
            assert got == truth, f"mismatch for: {sql}"

    def test_alias_invariance(self):
        for seed in range(25):
            sql_a, truth_a = join2_with_aliases(seed, ("T1", "T2"))
            sql_b, truth_b = join2_with_aliases(seed, ("alpha", "beta"))
            assert truth_a == truth_b
            assert extract_schema(sql_a, CORPUS_CATALOG) == extract_schema(sql_b, CORPUS_CATALOG)

    def test_quoting_invariance(self):
        plain = "SELECT name, toughness FROM cards WHERE watermark = 'abzan'"
        quoted = 'SELECT "Name", `Toughness` FROM [Cards] WHERE "Watermark" = \'abzan\''
        assert extract_schema(plain, CARDS_CATALOG) == extract_schema(quoted, CARDS_CATALOG)

    def test_soundness_over_corpus(self):
        for sql, _ in generate_corpus(100, seed=13):
            schema = extract_schema(sql, CORPUS_CATALOG)
            for table in schema.tables():
                assert CORPUS_CATALOG.has_table(table)
            for table, column in schema.columns():
                assert CORPUS_CATALOG.has_column(table, column)
