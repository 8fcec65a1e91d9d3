total = 0
for number in range(1, 11):
    total = total + number
print("The sum of 1 to 10 is", total)
