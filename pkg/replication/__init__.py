"""Cloud-to-edge service definition replication."""
