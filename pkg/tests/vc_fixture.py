"""Heap-free conditions over int x and y, with their known status."""

VALID = [
    "(== (* x 0) 0)",
    "(==> (< x y) (<= x y))",
    "(== (+ x y) (+ y x))",
    "(>= (* x x) 0)",
    "(==> (> x 0) (> (* x x) 0))",
    "(== (- x x) 0)",
    "(==> (and (<= 0 x) (< x 5)) (< x 10))",
    "(or (< x y) (>= x y))",
    "(== (ite (< x y) x y) (ite (<= y x) y x))",
    "(forall (k int) (==> (and (<= 0 k) (< k x)) (< k x)))",
    "(==> (> y 0) (and (<= 0 (mod x y)) (< (mod x y) y)))",
    "(==> (!= y 0) (== x (+ (* y (div x y)) (mod x y))))",
    "(let ((z (+ x 1))) (> z x))",
    "(not (and (< x y) (< y x)))",
    "(==> (== x y) (== (* x 2) (+ x y)))",
    "(<= (ite (< x 0) (- 0 x) x) (+ (ite (< x 0) (- 0 x) x) (* y y)))",
    "(forall (k int) (==> (== k x) (== (+ k 1) (+ x 1))))",
    "(==> (and (>= x 0) (>= y 0)) (>= (* x y) 0))",
    "(== (div (* 2 x) 2) x)",
    "(==> (< x 100) (< x 101))",
]

INVALID = [
    "(< x 5)",
    "(== (* x y) x)",
    "(> (* x x) 0)",
    "(==> (< x y) (< (* 2 x) y))",
    "(== (div x 2) (- x (div x 2)))",
    "(< x y)",
    "(!= (mod x 3) 2)",
    "(forall (k int) (==> (< k x) (>= k 0)))",
    "(==> (> x y) (> x 0))",
    "(== (+ x 1) (* x 1))",
    "(<= (* x y) (+ x y))",
    "(let ((z (* x x))) (< z 50))",
    "(== (ite (< x 0) (- 0 x) x) x)",
    "(or (< x 0) (> x 0))",
    "(== (mod x 2) (mod y 2))",
    "(==> (>= x 0) (< x 7))",
    "(> (+ x y) (- x y))",
    "(not (== x 3))",
    "(forall (k int) (==> (and (<= 0 k) (< k 3)) (!= k x)))",
    "(>= (- x y) 0)",
]
