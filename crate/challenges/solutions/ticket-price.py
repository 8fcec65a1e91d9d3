age = int(input())
if age < 12:
    price = 5
elif age >= 65:
    price = 6
else:
    price = 10
print("Your ticket costs", price, "pounds")
