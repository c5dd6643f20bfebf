"""Edge-to-cloud link model."""
