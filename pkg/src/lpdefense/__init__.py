"""Target defense of sensitive links against similarity-based link prediction."""
