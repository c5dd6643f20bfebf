"""Edge API gateway: weighted-random edge/cloud routing."""
