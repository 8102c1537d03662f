"""Deterministic mini dataset: two SQLite databases and twenty questions.

Used for self-tests, mock-run generation, and the test suite. Every gold
query is guaranteed to execute and return at least one row; the builder
verifies this invariant after materializing.
"""

from __future__ import annotations

import json
import sqlite3
from pathlib import Path

__all__ = ["materialize", "QUESTIONS"]

_CARDS_DDL = [
    """CREATE TABLE cards (
        id INTEGER PRIMARY KEY,
        name TEXT,
        type TEXT,
        toughness INTEGER,
        watermark TEXT,
        uuid TEXT,
        rarity TEXT,
        mana_cost INTEGER
    )""",
    """CREATE TABLE foreign_data (
        id INTEGER PRIMARY KEY,
        uuid TEXT,
        language TEXT,
        name TEXT
    )""",
    """CREATE TABLE card_sets (
        id INTEGER PRIMARY KEY,
        code TEXT,
        name TEXT,
        release_year INTEGER,
        total_cards INTEGER
    )""",
]

_CARDS_ROWS = {
    "cards": [
        (1, "Ancient Oak", "Creature", 3, "abzan", "u001", "common", 2),
        (2, "Bog Serpent", "Creature", 5, None, "u002", "common", 4),
        (3, "Cinder Imp", "Creature", 1, "izzet", "u003", "uncommon", 1),
        (4, "Dawn Seraph", "Creature", 4, "abzan", "u004", "rare", 5),
        (5, "Ember Fox", "Creature", 2, None, "u005", "common", 2),
        (6, "Frost Wall", "Wall", 6, "azorius", "u006", "uncommon", 3),
        (7, "Gale Sprite", "Creature", 1, None, "u007", "common", 1),
        (8, "Hollow Golem", "Artifact", 99, None, "u008", "rare", 6),
        (9, "Iron Titan", "Artifact", 99, "boros", "u009", "mythic", 8),
        (10, "Jade Idol", "Artifact", 2, None, "u010", "uncommon", 3),
        (11, "Kelp Drake", "Creature", 3, "simic", "u011", "rare", 4),
        (12, "Lunar Moth", "Creature", 1, "azorius", "u012", "common", 1),
    ],
    "foreign_data": [
        (1, "u001", "French", "Chêne Ancien"),
        (2, "u001", "German", "Alte Eiche"),
        (3, "u004", "French", "Séraphin de l'Aube"),
        (4, "u009", "Japanese", "Tetsu no Kyojin"),
        (5, "u011", "French", "Drake de Varech"),
        (6, "u002", "German", "Sumpfschlange"),
        (7, "u006", "French", "Mur de Givre"),
        (8, "u012", "German", "Mondfalter"),
    ],
    "card_sets": [
        (1, "ANC", "Ancients", 2019, 250),
        (2, "BRM", "Brimstone", 2020, 300),
        (3, "CRY", "Crystalline", 2021, 280),
        (4, "DWN", "Dawnfall", 2022, 310),
    ],
}

_SCHOOLS_DDL = [
    """CREATE TABLE schools (
        cds_code TEXT PRIMARY KEY,
        school_name TEXT,
        county TEXT,
        charter INTEGER,
        enrollment INTEGER
    )""",
    """CREATE TABLE test_scores (
        cds_code TEXT,
        subject TEXT,
        avg_score REAL,
        num_takers INTEGER
    )""",
]

_SCHOOLS_ROWS = {
    "schools": [
        ("S001", "Alder High", "Alameda", 0, 1200),
        ("S002", "Birch Academy", "Alameda", 1, 350),
        ("S003", "Cedar High", "Contra Costa", 0, 980),
        ("S004", "Dogwood Charter", "Contra Costa", 1, 420),
        ("S005", "Elm Institute", "Fresno", 1, 510),
        ("S006", "Fir High", "Fresno", 0, 1500),
        ("S007", "Grove School", "Alameda", 0, 800),
        ("S008", "Hazel Academy", "Contra Costa", 1, 275),
        ("S009", "Ivy High", "Fresno", 0, 1100),
        ("S010", "Juniper School", "Alameda", 1, 630),
    ],
    "test_scores": [
        ("S001", "math", 521.5, 480),
        ("S001", "reading", 540.0, 470),
        ("S002", "math", 585.25, 120),
        ("S003", "math", 498.0, 400),
        ("S003", "reading", 505.5, 390),
        ("S004", "math", 610.0, 150),
        ("S004", "reading", 598.5, 140),
        ("S005", "math", 577.5, 200),
        ("S006", "math", 455.0, 610),
        ("S006", "reading", 470.25, 600),
        ("S007", "math", 530.0, 320),
        ("S008", "reading", 601.75, 90),
        ("S009", "math", 489.5, 450),
        ("S010", "math", 572.0, 260),
    ],
}

QUESTIONS = [
    {
        "question_id": 0, "db_id": "trading_cards", "difficulty": "simple",
        "question": "How many cards are there with toughness of 99?",
        "evidence": "toughness of 99 refers to toughness = 99",
        "SQL": "SELECT COUNT(id) FROM cards WHERE toughness = 99",
    },
    {
        "question_id": 1, "db_id": "trading_cards", "difficulty": "simple",
        "question": "List the names of all rare cards.",
        "evidence": "rare cards refers to rarity = 'rare'",
        "SQL": "SELECT name FROM cards WHERE rarity = 'rare'",
    },
    {
        "question_id": 2, "db_id": "trading_cards", "difficulty": "simple",
        "question": "What is the highest mana cost among artifact cards?",
        "evidence": None,
        "SQL": "SELECT MAX(mana_cost) FROM cards WHERE type = 'Artifact'",
    },
    {
        "question_id": 3, "db_id": "trading_cards", "difficulty": "moderate",
        "question": "Name the foreign name of the card that has an abzan watermark, and list the type of this card.",
        "evidence": "foreign name refers to foreign_data.name",
        "SQL": "SELECT DISTINCT T2.name, T1.type FROM cards AS T1 INNER JOIN foreign_data AS T2 "
               "ON T2.uuid = T1.uuid WHERE T1.watermark = 'abzan'",
    },
    {
        "question_id": 4, "db_id": "trading_cards", "difficulty": "moderate",
        "question": "How many French foreign names exist for creature cards?",
        "evidence": None,
        "SQL": "SELECT COUNT(T2.id) FROM cards AS T1 INNER JOIN foreign_data AS T2 "
               "ON T1.uuid = T2.uuid WHERE T2.language = 'French' AND T1.type = 'Creature'",
    },
    {
        "question_id": 5, "db_id": "trading_cards", "difficulty": "simple",
        "question": "List card names with toughness greater than 4, ordered by toughness descending.",
        "evidence": None,
        "SQL": "SELECT name FROM cards WHERE toughness > 4 ORDER BY toughness DESC",
    },
    {
        "question_id": 6, "db_id": "trading_cards", "difficulty": "moderate",
        "question": "For each rarity, how many cards are there? List the rarity and the count.",
        "evidence": None,
        "SQL": "SELECT rarity, COUNT(id) FROM cards GROUP BY rarity",
    },
    {
        "question_id": 7, "db_id": "trading_cards", "difficulty": "challenging",
        "question": "Which rarities have an average mana cost above 3? List them with the average.",
        "evidence": None,
        "SQL": "SELECT rarity, AVG(mana_cost) FROM cards GROUP BY rarity HAVING AVG(mana_cost) > 3",
    },
    {
        "question_id": 8, "db_id": "trading_cards", "difficulty": "moderate",
        "question": "What are the names of cards that have at least one foreign translation?",
        "evidence": None,
        "SQL": "SELECT DISTINCT c.name FROM cards c JOIN foreign_data f ON c.uuid = f.uuid",
    },
    {
        "question_id": 9, "db_id": "trading_cards", "difficulty": "challenging",
        "question": "List the names of cards whose mana cost is higher than the average mana cost of all cards.",
        "evidence": None,
        "SQL": "SELECT name FROM cards WHERE mana_cost > (SELECT AVG(mana_cost) FROM cards)",
    },
    {
        "question_id": 10, "db_id": "trading_cards", "difficulty": "simple",
        "question": "How many card sets were released after 2019?",
        "evidence": "released after 2019 refers to release_year > 2019",
        "SQL": "SELECT COUNT(*) FROM card_sets WHERE release_year > 2019",
    },
    {
        "question_id": 11, "db_id": "trading_cards", "difficulty": "challenging",
        "question": "What is the name of the set with the most total cards among sets released before 2022?",
        "evidence": None,
        "SQL": "SELECT name FROM card_sets WHERE release_year < 2022 ORDER BY total_cards DESC LIMIT 1",
    },
    {
        "question_id": 12, "db_id": "school_perf", "difficulty": "simple",
        "question": "How many charter schools are there?",
        "evidence": "charter school refers to charter = 1",
        "SQL": "SELECT COUNT(cds_code) FROM schools WHERE charter = 1",
    },
    {
        "question_id": 13, "db_id": "school_perf", "difficulty": "simple",
        "question": "List the school names in Fresno county.",
        "evidence": None,
        "SQL": "SELECT school_name FROM schools WHERE county = 'Fresno'",
    },
    {
        "question_id": 14, "db_id": "school_perf", "difficulty": "moderate",
        "question": "What is the average math score of schools in Alameda county?",
        "evidence": None,
        "SQL": "SELECT AVG(T2.avg_score) FROM schools AS T1 INNER JOIN test_scores AS T2 "
               "ON T1.cds_code = T2.cds_code WHERE T1.county = 'Alameda' AND T2.subject = 'math'",
    },
    {
        "question_id": 15, "db_id": "school_perf", "difficulty": "moderate",
        "question": "Which school has the highest math score? Give its name.",
        "evidence": None,
        "SQL": "SELECT T1.school_name FROM schools AS T1 INNER JOIN test_scores AS T2 "
               "ON T1.cds_code = T2.cds_code WHERE T2.subject = 'math' "
               "ORDER BY T2.avg_score DESC LIMIT 1",
    },
    {
        "question_id": 16, "db_id": "school_perf", "difficulty": "challenging",
        "question": "For each county, how many schools have enrollment above 500?",
        "evidence": None,
        "SQL": "SELECT county, COUNT(cds_code) FROM schools WHERE enrollment > 500 GROUP BY county",
    },
    {
        "question_id": 17, "db_id": "school_perf", "difficulty": "challenging",
        "question": "List the names of non-charter schools whose math score is below 500.",
        "evidence": "non-charter refers to charter = 0",
        "SQL": "SELECT T1.school_name FROM schools AS T1 INNER JOIN test_scores AS T2 "
               "ON T1.cds_code = T2.cds_code WHERE T1.charter = 0 AND T2.subject = 'math' "
               "AND T2.avg_score < 500",
    },
    {
        "question_id": 18, "db_id": "school_perf", "difficulty": "moderate",
        "question": "How many reading test takers are there in total across all schools?",
        "evidence": None,
        "SQL": "SELECT SUM(num_takers) FROM test_scores WHERE subject = 'reading'",
    },
    {
        "question_id": 19, "db_id": "school_perf", "difficulty": "challenging",
        "question": "Which counties have more than one charter school? List the county and the charter school count.",
        "evidence": None,
        "SQL": "SELECT county, COUNT(cds_code) FROM schools WHERE charter = 1 "
               "GROUP BY county HAVING COUNT(cds_code) > 1",
    },
]

_DATABASES = {
    "trading_cards": (_CARDS_DDL, _CARDS_ROWS),
    "school_perf": (_SCHOOLS_DDL, _SCHOOLS_ROWS),
}


def _build_database(path: Path, ddl: list[str], rows: dict[str, list[tuple]]) -> None:
    if path.exists():
        path.unlink()
    conn = sqlite3.connect(path)
    try:
        for statement in ddl:
            conn.execute(statement)
        for table, table_rows in rows.items():
            placeholders = ",".join("?" * len(table_rows[0]))
            conn.executemany(f"INSERT INTO {table} VALUES ({placeholders})", table_rows)
        conn.commit()
    finally:
        conn.close()


def materialize(root: str | Path) -> Path:
    """Write the dataset under `root`; returns the manifest path.

    Layout: questions.json, manifest.json, databases/<db_id>/<db_id>.sqlite.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for db_id, (ddl, rows) in _DATABASES.items():
        db_dir = root / "databases" / db_id
        db_dir.mkdir(parents=True, exist_ok=True)
        _build_database(db_dir / f"{db_id}.sqlite", ddl, rows)

    questions_path = root / "questions.json"
    questions_path.write_text(
        json.dumps(QUESTIONS, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    manifest = {
        "name": "mini",
        "questions_path": "questions.json",
        "databases_root": "databases",
        "question_field_map": {
            "question_id": "question_id",
            "db_id": "db_id",
            "question": "question",
            "gold_sql": "SQL",
            "difficulty": "difficulty",
            "evidence": "evidence",
        },
    }
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    _verify(root)
    return manifest_path


def _verify(root: Path) -> None:
    """Every gold query must execute and return at least one row."""
    for row in QUESTIONS:
        db_id = row["db_id"]
        db_path = root / "databases" / db_id / f"{db_id}.sqlite"
        conn = sqlite3.connect(f"file:{db_path.as_posix()}?mode=ro", uri=True)
        try:
            rows = conn.execute(row["SQL"]).fetchall()
        finally:
            conn.close()
        if not rows:
            raise AssertionError(
                f"mini dataset question {row['question_id']} returned no rows"
            )
