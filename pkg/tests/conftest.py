import json
import sqlite3

import pytest

from pvsql.core import Task
from pvsql.executor import DatabaseHandle

# Row order matters for the scripted probe replay: the first three customer
# states must stream out as CA, NY, TX.
CUSTOMERS = [
    (1, "Zoe", "CA", "Fresno"),
    (2, "Amy", "NY", "Albany"),
    (3, "Moe", "TX", "Austin"),
    (4, "Bea", "CA", "Irvine"),
    (5, "Cal", "WA", "Tacoma"),
    (6, "Dan", "NV", "Reno"),
]

PRODUCTS = [
    (1, "Widget", "Gadgets", 19.99),
    (2, "Sprocket", "Gadgets", 45.5),
    (3, "Doohickey", "Tools", 120.0),
    (4, "Gizmo", "Tools", 75.25),
    (5, "Thingamajig", "Toys", 9.99),
    (6, "Whatsit", "Toys", 150.0),
]

ORDERS = [
    # id, customer, product, qty, amount, order_date, ship_date, required_date
    (1, 1, 1, 2, 39.98, "2023-01-05", "2023-01-15", "2023-01-10"),
    (2, 2, 3, 1, 120.0, "2023-02-10", "2023-02-12", "2023-02-20"),
    (3, 1, 2, 3, 136.5, "2022-11-01", "2022-11-20", "2022-11-10"),
    (4, 3, 4, 1, 75.25, "2023-03-01", "2023-03-02", "2023-03-05"),
    (5, 4, 6, 1, 150.0, "2023-05-15", "2023-05-30", "2023-05-20"),
    (6, 5, 5, 10, 99.9, "2023-06-01", "2023-06-03", "2023-06-07"),
    (7, 2, 1, 1, 19.99, "2022-07-04", "2022-07-10", "2022-07-09"),
    (8, 6, 2, 2, 91.0, "2023-08-20", "2023-08-21", "2023-08-25"),
    (9, 4, 3, 1, 120.0, "2023-09-09", "2023-09-19", "2023-09-12"),
    (10, 1, 5, 5, 49.95, "2023-10-31", "2023-11-02", "2023-11-05"),
    (11, 3, 6, 1, 150.0, "2022-12-12", "2022-12-15", "2022-12-20"),
    (12, 5, 4, 2, 150.5, "2023-04-01", "2023-04-08", "2023-04-03"),
]


def build_shop_db(path) -> None:
    conn = sqlite3.connect(path)
    conn.executescript(
        """
        CREATE TABLE customers (
            id INTEGER PRIMARY KEY,
            name TEXT,
            state TEXT,
            city TEXT
        );
        CREATE TABLE products (
            id INTEGER PRIMARY KEY,
            name TEXT,
            category TEXT,
            price REAL
        );
        CREATE TABLE orders (
            id INTEGER PRIMARY KEY,
            customer_id INTEGER REFERENCES customers(id),
            product_id INTEGER REFERENCES products(id),
            quantity INTEGER,
            amount REAL,
            order_date TEXT,
            ship_date TEXT,
            required_date TEXT
        );
        """
    )
    conn.executemany("INSERT INTO customers VALUES (?,?,?,?)", CUSTOMERS)
    conn.executemany("INSERT INTO products VALUES (?,?,?,?)", PRODUCTS)
    conn.executemany("INSERT INTO orders VALUES (?,?,?,?,?,?,?,?)", ORDERS)
    conn.commit()
    conn.close()


@pytest.fixture(scope="session")
def db_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("dbs")
    shop_dir = root / "shop"
    shop_dir.mkdir()
    build_shop_db(shop_dir / "shop.sqlite")
    return root


@pytest.fixture
def shop_db(db_root):
    handle = DatabaseHandle(db_id="shop", path=str(db_root / "shop" / "shop.sqlite"))
    yield handle
    handle.close()


# ---------------------------------------------------------------------------
# Scripted case-study scenario
# ---------------------------------------------------------------------------

CASE_STUDY_QUESTION = (
    "List the top 3 unique product categories by percentage of orders from "
    "California customers that were shipped late in 2023"
)

CASE_STUDY_INITIAL_SQL = (
    "SELECT p.category, CAST(SUM(CASE WHEN o.ship_date > o.required_date THEN 1 ELSE 0 END) AS REAL) "
    "* 100 / COUNT(*) FROM orders o JOIN customers c ON o.customer_id = c.id "
    "JOIN products p ON o.product_id = p.id WHERE c.state = 'CA' GROUP BY p.category"
)

CASE_STUDY_REPAIRED_SQL = (
    "SELECT p.category, CAST(SUM(CASE WHEN o.ship_date > o.required_date THEN 1 ELSE 0 END) AS REAL) "
    "* 100 / COUNT(*) AS late_pct FROM orders o JOIN customers c ON o.customer_id = c.id "
    "JOIN products p ON o.product_id = p.id WHERE c.state = 'CA' "
    "AND strftime('%Y', o.order_date) = '2023' GROUP BY p.category "
    "ORDER BY late_pct DESC LIMIT 3"
)


def case_study_task() -> Task:
    return Task(task_id="case-study", db_id="shop", question=CASE_STUDY_QUESTION)


def case_study_script() -> list[dict]:
    """Mock transcript reproducing the two-probe, one-repair scenario."""
    return [
        {
            "expect_kind": "probe",
            "response_text": json.dumps(
                {
                    "action": "probe",
                    "probe_sql": "SELECT DISTINCT state FROM customers LIMIT 5",
                    "relevant_columns": {"customers": ["state"]},
                    "value_mappings": {"California": "CA"},
                }
            ),
            "tokens_in": 850,
            "tokens_out": 62,
        },
        {
            "expect_kind": "probe",
            "response_text": json.dumps(
                {
                    "action": "probe",
                    "probe_sql": "SELECT ship_date, required_date FROM orders LIMIT 3",
                    "relevant_columns": {"orders": ["ship_date", "required_date"]},
                    "value_mappings": {},
                }
            ),
            "tokens_in": 910,
            "tokens_out": 58,
        },
        {
            "expect_kind": "probe",
            "response_text": json.dumps({"action": "done"}),
            "tokens_in": 960,
            "tokens_out": 12,
        },
        {
            "expect_kind": "generate",
            "response_text": f"```sql\n{CASE_STUDY_INITIAL_SQL}\n```",
            "tokens_in": 1240,
            "tokens_out": 88,
        },
        {
            "expect_kind": "repair",
            "response_text": CASE_STUDY_REPAIRED_SQL,
            "tokens_in": 1410,
            "tokens_out": 96,
        },
    ]
