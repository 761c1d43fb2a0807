from hypothesis import settings

# property tests do real numerical work; wall-clock deadlines only add flakes
settings.register_profile("no_deadline", deadline=None)
settings.load_profile("no_deadline")
