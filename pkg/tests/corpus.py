"""Hand-labeled corpora used as oracles by the unit and acceptance tests.

LABELED_QUESTIONS: 50 questions over the shop fixture schema. Expected
constraint labels were assigned by hand from the trigger-phrase rule table
before running the extractor; every gold SQL was written to satisfy its
question's constraints, so the gold pass rate over this corpus is 100%.

VERIFIER_CASES: satisfying / violating SQL per constraint kind, hand-checked
against the verification criteria table.
"""

from pvsql.core import Constraint, ConstraintKind as K

# (question, expected {(kind, param)}, gold_sql)
LABELED_QUESTIONS: list[tuple[str, set, str]] = [
    # --- distinctness -----------------------------------------------------
    ("List the distinct states of our customers.",
     {(K.DISTINCT, None)},
     "SELECT DISTINCT state FROM customers"),
    ("Show the unique product categories.",
     {(K.DISTINCT, None)},
     "SELECT DISTINCT category FROM products"),
    ("Which different cities do customers live in?",
     {(K.DISTINCT, None)},
     "SELECT DISTINCT city FROM customers"),
    ("Show customer states with no duplicate entries.",
     {(K.DISTINCT, None)},
     "SELECT DISTINCT state FROM customers"),
    # --- top-k ------------------------------------------------------------
    ("What are the top 3 products by price?",
     {(K.TOP_K, 3)},
     "SELECT name FROM products ORDER BY price DESC LIMIT 3"),
    ("List the first 5 orders by order date.",
     {(K.TOP_K, 5)},
     "SELECT id FROM orders ORDER BY order_date LIMIT 5"),
    ("Show the best two customers by total spending.",
     {(K.TOP_K, 2), (K.SUM, None)},
     "SELECT c.name FROM customers c JOIN orders o ON o.customer_id = c.id "
     "GROUP BY c.id ORDER BY SUM(o.amount) DESC LIMIT 2"),
    ("Which are the worst 4 products by price?",
     {(K.TOP_K, 4)},
     "SELECT name FROM products ORDER BY price ASC LIMIT 4"),
    ("Give the highest 3 order amounts.",
     {(K.TOP_K, 3)},
     "SELECT amount FROM orders ORDER BY amount DESC LIMIT 3"),
    # --- ranking ----------------------------------------------------------
    ("What is the rank of each product by price?",
     {(K.RANKING, None)},
     "SELECT name, RANK() OVER (ORDER BY price DESC) FROM products"),
    ("In which position is each order when sorted by amount?",
     {(K.RANKING, None)},
     "SELECT id, ROW_NUMBER() OVER (ORDER BY amount) FROM orders"),
    ("Give the ranking of customers by id.",
     {(K.RANKING, None)},
     "SELECT name, DENSE_RANK() OVER (ORDER BY id) FROM customers"),
    # --- counting ---------------------------------------------------------
    ("How many customers are there?",
     {(K.COUNT, None)},
     "SELECT COUNT(*) FROM customers"),
    ("What is the number of orders in the table?",
     {(K.COUNT, None)},
     "SELECT COUNT(*) FROM orders"),
    ("Count the products in category 'Gadgets'.",
     {(K.COUNT, None)},
     "SELECT COUNT(*) FROM products WHERE category = 'Gadgets'"),
    ("What is the total number of products?",
     {(K.COUNT, None)},
     "SELECT COUNT(*) FROM products"),
    ("What quantity of orders were shipped to Texas customers?",
     {(K.COUNT, None)},
     "SELECT COUNT(*) FROM orders o JOIN customers c ON o.customer_id = c.id WHERE c.state = 'TX'"),
    # --- percentage -------------------------------------------------------
    ("What percentage of customers are from CA?",
     {(K.PERCENT, None)},
     "SELECT CAST(SUM(CASE WHEN state = 'CA' THEN 1 ELSE 0 END) AS REAL) * 100 / COUNT(*) FROM customers"),
    ("What percent of orders were late?",
     {(K.PERCENT, None)},
     "SELECT CAST(SUM(CASE WHEN ship_date > required_date THEN 1 ELSE 0 END) AS REAL) * 100 / COUNT(*) FROM orders"),
    ("What is the ratio of orders to customers?",
     {(K.PERCENT, None)},
     "SELECT CAST((SELECT COUNT(*) FROM orders) AS REAL) / (SELECT COUNT(*) FROM customers)"),
    ("What proportion of products cost more than 50?",
     {(K.PERCENT, None), (K.COMPARE, ">")},
     "SELECT CAST((SELECT COUNT(*) FROM products WHERE price > 50) AS REAL) / COUNT(*) FROM products"),
    ("What is the fraction of orders from Texas customers?",
     {(K.PERCENT, None)},
     "SELECT CAST((SELECT COUNT(*) FROM orders o JOIN customers c ON o.customer_id = c.id "
     "WHERE c.state = 'TX') AS REAL) / COUNT(*) FROM orders"),
    # --- summation ----------------------------------------------------------
    ("What is the total of all order amounts?",
     {(K.SUM, None)},
     "SELECT SUM(amount) FROM orders"),
    ("Give the sum of quantities ordered.",
     {(K.SUM, None)},
     "SELECT SUM(quantity) FROM orders"),
    ("What is the combined price of all products?",
     {(K.SUM, None)},
     "SELECT SUM(price) FROM products"),
    ("Show the overall amount spent by each customer.",
     {(K.SUM, None)},
     "SELECT customer_id, SUM(amount) FROM orders GROUP BY customer_id"),
    # --- average ------------------------------------------------------------
    ("What is the average price of products?",
     {(K.AVERAGE, None)},
     "SELECT AVG(price) FROM products"),
    ("What is the mean order amount?",
     {(K.AVERAGE, None)},
     "SELECT AVG(amount) FROM orders"),
    ("What is the typical quantity per order?",
     {(K.AVERAGE, None)},
     "SELECT AVG(quantity) FROM orders"),
    ("Show the avg price by category.",
     {(K.AVERAGE, None)},
     "SELECT category, AVG(price) FROM products GROUP BY category"),
    # --- extreme ------------------------------------------------------------
    ("What is the maximum order amount?",
     {(K.EXTREME, "max")},
     "SELECT MAX(amount) FROM orders"),
    ("Find the smallest product price.",
     {(K.EXTREME, "min")},
     "SELECT MIN(price) FROM products"),
    ("Which customer spent the most money?",
     {(K.EXTREME, "max")},
     "SELECT c.name FROM customers c JOIN orders o ON o.customer_id = c.id "
     "GROUP BY c.id ORDER BY SUM(o.amount) DESC LIMIT 1"),
    ("Show the product with the highest price.",
     {(K.EXTREME, "max")},
     "SELECT name FROM products ORDER BY price DESC LIMIT 1"),
    ("Who bought the least quantity in a single order?",
     {(K.EXTREME, "min")},
     "SELECT c.name FROM customers c JOIN orders o ON o.customer_id = c.id ORDER BY o.quantity ASC LIMIT 1"),
    ("What are the top products by price?",
     {(K.EXTREME, "max")},
     "SELECT name FROM products WHERE price = (SELECT MAX(price) FROM products)"),
    # --- temporal -----------------------------------------------------------
    ("What is the latest order date?",
     {(K.TEMPORAL, "desc")},
     "SELECT order_date FROM orders ORDER BY order_date DESC LIMIT 1"),
    ("Show the earliest ship date recorded.",
     {(K.TEMPORAL, "asc")},
     "SELECT ship_date FROM orders ORDER BY ship_date ASC LIMIT 1"),
    ("Which order has the most recent ship date?",
     {(K.TEMPORAL, "desc")},
     "SELECT id FROM orders ORDER BY ship_date DESC LIMIT 1"),
    ("Show the oldest order date in the table.",
     {(K.TEMPORAL, "asc")},
     "SELECT order_date FROM orders ORDER BY order_date ASC LIMIT 1"),
    ("What was the last order date of 2023?",
     {(K.TEMPORAL, "desc"), (K.LITERAL, "2023")},
     "SELECT order_date FROM orders WHERE strftime('%Y', order_date) = '2023' "
     "ORDER BY order_date DESC LIMIT 1"),
    # --- comparison ---------------------------------------------------------
    ("List products that cost more than 100.",
     {(K.COMPARE, ">")},
     "SELECT name FROM products WHERE price > 100"),
    ("Which orders have quantity less than 5?",
     {(K.COMPARE, "<")},
     "SELECT id FROM orders WHERE quantity < 5"),
    ("Find customers with at least 2 orders.",
     {(K.COMPARE, ">=")},
     "SELECT customer_id FROM orders GROUP BY customer_id HAVING COUNT(*) >= 2"),
    ("Show products priced at most 30.",
     {(K.COMPARE, "<=")},
     "SELECT name FROM products WHERE price <= 30"),
    ("Which products cost no more than 20?",
     {(K.COMPARE, "<=")},
     "SELECT name FROM products WHERE price <= 20"),
    # --- combinations and the empty case ------------------------------------
    ("List the top 3 unique product categories by percentage of orders from "
     "California customers that were shipped late in 2023",
     {(K.TOP_K, 3), (K.DISTINCT, None), (K.PERCENT, None), (K.LITERAL, "2023")},
     "SELECT p.category, CAST(SUM(CASE WHEN o.ship_date > o.required_date THEN 1 ELSE 0 END) AS REAL) "
     "* 100 / COUNT(*) AS late_pct FROM orders o JOIN customers c ON o.customer_id = c.id "
     "JOIN products p ON o.product_id = p.id WHERE c.state = 'CA' AND strftime('%Y', o.order_date) = '2023' "
     "GROUP BY p.category ORDER BY late_pct DESC LIMIT 3"),
    ("Show me the table of employees.",
     set(),
     "SELECT * FROM customers"),
    ("How many distinct states do customers come from?",
     {(K.COUNT, None), (K.DISTINCT, None)},
     "SELECT COUNT(DISTINCT state) FROM customers"),
    ("What is the average price of the top 5 products by price?",
     {(K.AVERAGE, None), (K.TOP_K, 5)},
     "SELECT AVG(price) FROM (SELECT price FROM products ORDER BY price DESC LIMIT 5)"),
]


def labeled_tasks_json() -> list[dict]:
    """The labeled corpus in BIRD task-file layout (shop fixture database)."""
    return [
        {
            "question_id": i,
            "db_id": "shop",
            "question": question,
            "evidence": "",
            "SQL": gold,
            "difficulty": "simple",
        }
        for i, (question, _expected, gold) in enumerate(LABELED_QUESTIONS)
    ]


# (label, constraint, sql, expect_satisfied) - one satisfying and one
# violating statement per constraint kind, plus the ORDER BY + LIMIT 1
# extreme idiom and a wrong-direction temporal case.
VERIFIER_CASES: list[tuple[str, Constraint, str, bool]] = [
    ("distinct/sat-keyword", Constraint(K.DISTINCT),
     "SELECT DISTINCT state FROM customers", True),
    ("distinct/sat-groupby", Constraint(K.DISTINCT),
     "SELECT state FROM customers GROUP BY state", True),
    ("distinct/violation", Constraint(K.DISTINCT),
     "SELECT state FROM customers", False),
    ("topk/sat", Constraint(K.TOP_K, 3, "top 3"),
     "SELECT name FROM products ORDER BY price DESC LIMIT 3", True),
    ("topk/violation-no-order", Constraint(K.TOP_K, 3, "top 3"),
     "SELECT name FROM products LIMIT 3", False),
    ("topk/violation-wrong-n", Constraint(K.TOP_K, 3, "top 3"),
     "SELECT name FROM products ORDER BY price DESC LIMIT 5", False),
    ("ranking/sat", Constraint(K.RANKING),
     "SELECT name, RANK() OVER (ORDER BY price) FROM products", True),
    ("ranking/violation", Constraint(K.RANKING),
     "SELECT name FROM products ORDER BY price", False),
    ("count/sat", Constraint(K.COUNT),
     "SELECT COUNT(*) FROM t", True),
    ("count/violation", Constraint(K.COUNT),
     "SELECT id FROM t", False),
    ("percent/sat-division", Constraint(K.PERCENT),
     "SELECT CAST(a AS REAL) / b FROM t", True),
    ("percent/sat-times-100", Constraint(K.PERCENT),
     "SELECT AVG(CASE WHEN state = 'CA' THEN 1.0 ELSE 0 END) * 100 FROM customers", True),
    ("percent/violation", Constraint(K.PERCENT),
     "SELECT COUNT(*) FROM customers", False),
    ("sum/sat", Constraint(K.SUM),
     "SELECT SUM(amount) FROM orders", True),
    ("sum/violation", Constraint(K.SUM),
     "SELECT amount FROM orders", False),
    ("average/sat", Constraint(K.AVERAGE),
     "SELECT AVG(price) FROM products", True),
    ("average/violation", Constraint(K.AVERAGE),
     "SELECT price FROM products", False),
    ("extreme/sat-max", Constraint(K.EXTREME, "max"),
     "SELECT MAX(amount) FROM orders", True),
    ("extreme/sat-limit1-idiom", Constraint(K.EXTREME, "max"),
     "SELECT amount FROM orders ORDER BY amount DESC LIMIT 1", True),
    ("extreme/violation", Constraint(K.EXTREME, "max"),
     "SELECT amount FROM orders", False),
    ("temporal/sat-desc", Constraint(K.TEMPORAL, "desc", "latest"),
     "SELECT id FROM orders ORDER BY order_date DESC", True),
    ("temporal/sat-asc-default", Constraint(K.TEMPORAL, "asc", "earliest"),
     "SELECT id FROM orders ORDER BY ship_date", True),
    ("temporal/violation-direction", Constraint(K.TEMPORAL, "desc", "latest"),
     "SELECT id FROM orders ORDER BY order_date ASC", False),
    ("temporal/violation-not-date", Constraint(K.TEMPORAL, "asc", "earliest"),
     "SELECT id FROM orders ORDER BY amount ASC", False),
    ("compare/sat-gt", Constraint(K.COMPARE, ">", "more than"),
     "SELECT name FROM products WHERE price > 100", True),
    ("compare/sat-having", Constraint(K.COMPARE, ">=", "at least"),
     "SELECT customer_id FROM orders GROUP BY customer_id HAVING COUNT(*) >= 2", True),
    ("compare/violation-direction", Constraint(K.COMPARE, ">", "more than"),
     "SELECT name FROM products WHERE price < 100", False),
    ("literal/sat", Constraint(K.LITERAL, "2023", "2023"),
     "SELECT * FROM orders WHERE strftime('%Y', order_date) = '2023'", True),
    ("literal/violation", Constraint(K.LITERAL, "2023", "2023"),
     "SELECT * FROM orders", False),
]
