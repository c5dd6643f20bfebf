"""Edge and cloud execution pools with a scale-to-zero autoscaler."""
